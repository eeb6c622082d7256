#!/usr/bin/env python3
"""Smoke test for the Python extension module.

Build the module first, then run this script:

    cargo build --release -p specfilt-py
    python3 python/smoke_test.py

The script copies the built cdylib next to a temp dir under the name
Python expects and imports it from there.
"""

import json
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def locate_cdylib() -> pathlib.Path:
    for profile in ("release", "debug"):
        cand = ROOT / "target" / profile / "libspecfilt.so"
        if cand.exists():
            return cand
    sys.exit("libspecfilt.so not found; run: cargo build --release -p specfilt-py")


def main() -> None:
    workdir = tempfile.mkdtemp(prefix="specfilt-py-")
    shutil.copy(locate_cdylib(), pathlib.Path(workdir) / "specfilt.so")
    sys.path.insert(0, workdir)
    import specfilt

    print(f"specfilt {specfilt.version()}")

    # 3-node path fixture: exact pinned values.
    g = specfilt.Graph([(0, 1), (1, 2)], [0, 1, 1])
    assert g.node_count == 3 and g.class_count == 2
    assert g.class_sizes == [1, 2]
    per_class, h1 = g.homophily(1)
    assert abs(h1 - 4.0 / 9.0) < 1e-12, h1
    assert len(per_class) == 2

    pi, pi_tilde = g.interaction(1)
    assert abs(pi[0][0] - 0.5) < 1e-12
    assert abs(pi[1][0] - 1.0 / 6.0) < 1e-12
    assert abs(pi_tilde[1][1] - (5.0 / 12.0 + 1.0 / math.sqrt(6.0))) < 1e-12

    eigs, probs = g.label_spectrum(0, 1)
    expected = [(0.0, 1 / 7), (0.5, 2 / 3), (7 / 6, 4 / 21)]
    for (e, p), (we, wp) in zip(zip(eigs, probs), expected):
        assert abs(e - we) < 1e-9 and abs(p - wp) < 1e-9, (e, p)

    info = g.information_content(0, 1)
    assert abs(info - math.log(441.0 / 8.0)) < 1e-9, info

    # Transformed homophily of the scaled low-pass filter: 13/18 exactly.
    assert abs(g.filter_homophily("poly:1,-0.5") - 13.0 / 18.0) < 1e-12
    in_sg, in_sg1, _, kind, _ = g.family_check("poly:1,-0.5")
    assert in_sg and in_sg1 and kind == "low"

    report = json.loads(g.indicator_report_json(2))
    assert abs(report["homophily"][0]["graph"] - 4.0 / 9.0) < 1e-12

    bound = json.loads(g.bound_report_json("poly:1,-0.5", seed=7))
    assert bound["er"] >= bound["tight_bound"] - 1e-9
    assert abs(bound["spectral_bound"] - bound["spatial_bound"]) < 1e-9

    # Validation suite: passing and byte-deterministic.
    ok1, json1 = specfilt.validate("interaction", trials=25, seed=11, n_max=24)
    ok2, json2 = specfilt.validate("interaction", trials=25, seed=11, n_max=24)
    assert ok1 and ok2 and json1 == json2

    # Synthetic data round trip into a short training run.
    edges, labels, features = specfilt.sbm(
        30, 2, 0.6, 0.05, seed=4, feat_dim=6, feat_sep=1.5, feat_noise=0.5
    )
    assert len(labels) == 30 and len(features) == 30 and len(features[0]) == 6
    metrics = json.loads(
        specfilt.train(
            edges, labels, features, model="p-demuf",
            filters=2, depth=1, epochs=15, seed=3, hidden=8,
        )
    )
    assert len(metrics["per_epoch"]) == 15
    assert len(metrics["learned_epsilons"]) == 2
    assert all(-1.0 < e < 1.0 for e in metrics["learned_epsilons"])

    print("smoke test passed")


if __name__ == "__main__":
    main()
