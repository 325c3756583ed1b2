"""Regenerate the bundled model/system/experiment JSON fixtures.

Run from the repository root:  python scripts/make_fixtures.py
"""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "hfsem" / "configs"


def free(lo=-100.0, hi=100.0):
    return {"free": {"lo": lo, "hi": hi}}


def vfree():
    return free(0.1, 100.0)


def sym_free_tags(n):
    """Fully free symmetric matrix: variances on the diagonal, covariances off it."""
    return [[vfree() if i == j else free() for j in range(n)] for i in range(n)]


def zeros(r, c):
    return [[0.0] * c for _ in range(r)]


def diag(values):
    n = len(values)
    return [[float(values[i]) if i == j else 0.0 for j in range(n)] for i in range(n)]


# ---------------------------------------------------------------- sec5 system
sec5_true = {
    "kind": "diffusion-system",
    "name": "sec5-true",
    "processes": {
        "xi": {"a": [[0.5, 0.3], [0.2, 0.4]], "b": [2.0, 4.0],
               "s": [[1.0, 1.0], [0.0, 2.0]], "c0": [3.0, 5.0]},
        "delta": {"a": [[3, 0, 0, 0], [0, 2, 0, 0], [0, 0, 3, 0], [0, 0, 0, 2]],
                  "s": [[1, 0, 0, 0], [0, 2, 0, 0], [0, 0, 2, 0], [0, 0, 0, 1]]},
        "eps": {"a": [[2, 0], [0, 3]], "s": [[1, 0], [0, 3]]},
        "zeta": {"a": [[1.0]], "s": [[2.0]]},
    },
    "loadings": {
        "lambda_x1": [[1, 0], [2, 0], [0, 1], [0, 3]],
        "lambda_x2": [[1], [3]],
        "gamma": [[1, 2]],
        "b": [[0.0]],
    },
}

# ------------------------------------------------------ sec5 correct model
sec5_correct = {
    "kind": "lisrel-model",
    "name": "sec5-correct",
    "dims": {"p1": 4, "p2": 2, "k1": 2, "k2": 1},
    "matrices": {
        "lambda_x1": [[1.0, 0.0], [free(), 0.0], [0.0, 1.0], [0.0, free()]],
        "lambda_x2": [[1.0], [free()]],
        "gamma": [[free(), free()]],
        "b": [[0.0]],
        "sigma_xi_xi": sym_free_tags(2),
        "sigma_delta_delta": [[vfree() if i == j else 0.0 for j in range(4)] for i in range(4)],
        "sigma_eps_eps": [[vfree() if i == j else 0.0 for j in range(2)] for i in range(2)],
        "sigma_zeta_zeta": [[vfree()]],
    },
    "theta_init": [2, 3, 3, 1, 2, 2, 2, 4, 1, 4, 4, 1, 1, 9, 4],
    "theta_true": [2, 3, 3, 1, 2, 2, 2, 4, 1, 4, 4, 1, 1, 9, 4],
}

# ------------------------------------------------- sec5 misspecified models
# Starts sit near the population minimizer of the contrast against the
# true covariance so the optimizer lands in the right basin.
sec5_model_a = {
    "kind": "lisrel-model",
    "name": "sec5-model-a",
    "dims": {"p1": 4, "p2": 2, "k1": 1, "k2": 1},
    "matrices": {
        "lambda_x1": [[1.0], [free()], [free()], [free()]],
        "lambda_x2": [[1.0], [free()]],
        "gamma": [[free()]],
        "b": [[0.0]],
        "sigma_xi_xi": [[vfree()]],
        "sigma_delta_delta": [[vfree() if i == j else 0.0 for j in range(4)] for i in range(4)],
        "sigma_eps_eps": [[vfree() if i == j else 0.0 for j in range(2)] for i in range(2)],
        "sigma_zeta_zeta": [[vfree()]],
    },
    "theta_init": [2.0, 1.7, 5.0, 3.0, 4.7, 1.3, 1.7, 7.0, 4.1, 4.7, 1.0, 9.0, 2.3],
}

sec5_model_b = {
    "kind": "lisrel-model",
    "name": "sec5-model-b",
    "dims": {"p1": 4, "p2": 2, "k1": 2, "k2": 1},
    "matrices": {
        "lambda_x1": [[1.0, 0.0], [0.0, free()], [0.0, 1.0], [free(), 0.0]],
        "lambda_x2": [[1.0], [free()]],
        "gamma": [[free(), free()]],
        "b": [[0.0]],
        "sigma_xi_xi": sym_free_tags(2),
        "sigma_delta_delta": [[vfree() if i == j else 0.0 for j in range(4)] for i in range(4)],
        "sigma_eps_eps": [[vfree() if i == j else 0.0 for j in range(2)] for i in range(2)],
        "sigma_zeta_zeta": [[vfree()]],
    },
    "theta_init": [1.2, 4.8, 3.0, 2.0, 1.5, 1.25, 2.4, 3.5, 1.75, 7.4, 4.5, 8.2, 1.0, 9.0, 1.8],
}

# ---------------------------------------------------------------- sec6 system
sec6_true = {
    "kind": "diffusion-system",
    "name": "sec6-true",
    "processes": {
        "xi": {"a": [[0.5, 0.4, 0.1], [0.2, 0.2, 0.6], [0.3, 0.4, 0.2]],
               "b": [2.0, 4.0, 2.0],
               "s": [[2, 0, 0], [0, 1, 0], [0, 0, 3]], "c0": [3.0, 5.0, 2.0]},
        "delta": {"a": diag([3, 2, 3, 2, 2, 3, 1, 3, 1]),
                  "s": diag([1, 2, 1, 5, 2, 3, 1, 2, 3])},
        "eps": {"a": diag([1, 3, 2, 3, 2, 2]), "s": diag([3, 1, 2, 1, 5, 2])},
        "zeta": {"a": [[3, 0], [0, 1]], "s": [[3, 0], [0, 1]]},
    },
    "loadings": {
        "lambda_x1": [[1, 0, 0], [0, 1, 0], [0, 0, 1],
                      [3, 0, 0], [0, 2, 0], [0, 0, 5],
                      [4, 0, 0], [0, 6, 0], [0, 0, 3]],
        "lambda_x2": [[1, 0], [0, 1], [5, 0], [0, 3], [7, 0], [0, 2]],
        "gamma": [[5, 2, 0], [0, 0, 2]],
        "b": [[0.0, 0.0], [0.0, 0.0]],
    },
}

# ------------------------------------------------------ sec6 correct model
theta0_sec6 = [
    3, 0, 0, 0, 2, 0, 0, 0, 5, 4, 0, 0, 0, 6, 0, 0, 0, 3,
    5, 0, 0, 3, 7, 0, 0, 2,
    5, 2, 0, 0, 0, 2,
    4, 0, 0, 1, 0, 9,
    1, 4, 1, 25, 4, 9, 1, 4, 9,
    9, 1, 4, 1, 25, 4,
    9, 0, 1,
]

sec6_correct = {
    "kind": "lisrel-model",
    "name": "sec6-correct",
    "dims": {"p1": 9, "p2": 6, "k1": 3, "k2": 2},
    "matrices": {
        "lambda_x1": [[1.0 if i == j else 0.0 for j in range(3)] for i in range(3)]
        + [[free() for _ in range(3)] for _ in range(6)],
        "lambda_x2": [[1.0 if i == j else 0.0 for j in range(2)] for i in range(2)]
        + [[free() for _ in range(2)] for _ in range(4)],
        "gamma": [[free() for _ in range(3)] for _ in range(2)],
        "b": zeros(2, 2),
        "sigma_xi_xi": sym_free_tags(3),
        "sigma_delta_delta": [[vfree() if i == j else 0.0 for j in range(9)] for i in range(9)],
        "sigma_eps_eps": [[vfree() if i == j else 0.0 for j in range(6)] for i in range(6)],
        "sigma_zeta_zeta": sym_free_tags(2),
    },
    "theta_init": theta0_sec6,
    "theta_true": theta0_sec6,
}

# -------------------------------------------------- sec6 misspecified model
# Two common factors instead of three; the start keeps the geometry of the
# true loadings restricted to the first two factors.
sec6_misspec = {
    "kind": "lisrel-model",
    "name": "sec6-misspec",
    "dims": {"p1": 9, "p2": 6, "k1": 2, "k2": 2},
    "matrices": {
        "lambda_x1": [[1.0 if i == j else 0.0 for j in range(2)] for i in range(2)]
        + [[free() for _ in range(2)] for _ in range(7)],
        "lambda_x2": [[1.0 if i == j else 0.0 for j in range(2)] for i in range(2)]
        + [[free() for _ in range(2)] for _ in range(4)],
        "gamma": [[free() for _ in range(2)] for _ in range(2)],
        "b": zeros(2, 2),
        "sigma_xi_xi": sym_free_tags(2),
        "sigma_delta_delta": [[vfree() if i == j else 0.0 for j in range(9)] for i in range(9)],
        "sigma_eps_eps": [[vfree() if i == j else 0.0 for j in range(6)] for i in range(6)],
        "sigma_zeta_zeta": sym_free_tags(2),
    },
    "theta_init": [
        0, 0, 3, 0, 0, 2, 0, 0, 4, 0, 0, 6, 0, 0,
        5, 0, 0, 3, 7, 0, 0, 2,
        5, 2, 0.5, 0.5,
        4, 0, 1,
        1, 4, 1, 25, 4, 9, 1, 4, 9,
        9, 1, 4, 1, 25, 4,
        9, 0, 1,
    ],
}

# ---------------------------------------------------------------- experiments
experiments = {
    "sec5": {
        "kind": "experiment",
        "name": "sec5",
        "true_model": "sec5-true",
        "fit_models": ["sec5-correct"],
        "grid": {"n": 10000, "h": 0.001},
        "replications": 10000,
        "seed": 7001,
        "alpha": 0.05,
        "penalty": None,
        "regime": "non-ergodic",
    },
    "sec5-misspec": {
        "kind": "experiment",
        "name": "sec5-misspec",
        "true_model": "sec5-true",
        "fit_models": ["sec5-model-a", "sec5-model-b"],
        "grid": {"n": 10000, "h": 0.001},
        "replications": 10000,
        "seed": 7002,
        "alpha": 0.05,
        "penalty": None,
        "regime": "non-ergodic",
    },
    "sec5-ergodic": {
        "kind": "experiment",
        "name": "sec5-ergodic",
        "true_model": "sec5-true",
        "fit_models": ["sec5-correct"],
        "grid": {"n": 1000000, "h": 0.0001},
        "replications": 10000,
        "seed": 7003,
        "alpha": 0.05,
        "penalty": None,
        "regime": "ergodic",
    },
    "sec5-ergodic-desk": {
        "kind": "experiment",
        "name": "sec5-ergodic-desk",
        "true_model": "sec5-true",
        "fit_models": ["sec5-correct"],
        "grid": {"n": 100000, "h": 0.0001},
        "replications": 300,
        "seed": 7003,
        "alpha": 0.05,
        "penalty": None,
        "regime": "ergodic",
    },
    "sec6": {
        "kind": "experiment",
        "name": "sec6",
        "true_model": "sec6-true",
        "fit_models": ["sec6-correct"],
        "grid": {"n": 10000, "h": 0.0001},
        "replications": 10000,
        "seed": 7004,
        "alpha": 0.05,
        "penalty": {"lambda1": {"power_of_n": -0.6}, "lambda2": 10.0,
                    "gamma": 4.0, "delta": 0.1},
        "regime": "non-ergodic",
    },
    "sec6-misspec": {
        "kind": "experiment",
        "name": "sec6-misspec",
        "true_model": "sec6-true",
        "fit_models": ["sec6-misspec"],
        "grid": {"n": 10000, "h": 0.0001},
        "replications": 10000,
        "seed": 7005,
        "alpha": 0.05,
        "penalty": {"lambda1": {"power_of_n": -0.6}, "lambda2": 10.0,
                    "gamma": 4.0, "delta": 0.1},
        "regime": "non-ergodic",
    },
}


def main():
    models = {
        "sec5-true": sec5_true,
        "sec5-correct": sec5_correct,
        "sec5-model-a": sec5_model_a,
        "sec5-model-b": sec5_model_b,
        "sec6-true": sec6_true,
        "sec6-correct": sec6_correct,
        "sec6-misspec": sec6_misspec,
    }
    (OUT / "models").mkdir(parents=True, exist_ok=True)
    (OUT / "experiments").mkdir(parents=True, exist_ok=True)
    for name, doc in models.items():
        (OUT / "models" / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")
    for name, doc in experiments.items():
        (OUT / "experiments" / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {len(models)} models and {len(experiments)} experiments under {OUT}")


if __name__ == "__main__":
    main()
