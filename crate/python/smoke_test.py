"""Smoke test for the robust_collab extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import json

import robust_collab as rc


def main():
    assert rc.pac_sample_size(10, 0.1, 0.1) == 254

    powerset = rc.HypothesisClass.powerset(3)
    assert powerset.domain_size == 4 and powerset.vc_dimension == 3
    assert powerset.consistent([(0, True), (2, False)]) == [True, False, False, False]
    assert powerset.consistent([(1, True), (1, False)]) is None

    threshold = rc.HypothesisClass.threshold(16)
    inst = rc.Instance.random(threshold, n=16, eta=0.0, seed=5)
    again = rc.Instance.from_json(inst.to_json())
    assert again.to_json() == inst.to_json()

    result = json.loads(inst.run(0.1, 0.1))
    per_oracle, total = inst.ledger()
    assert result["run"]["ledger"]["total"] == total == sum(per_oracle)
    assert len(result["run"]["outputs"]) == 16
    print("robust run:", total, "samples, success", result["assessment"]["success"])

    baseline = json.loads(rc.Instance.random(threshold, 16, 0.0, 5).baseline(0.1, 0.1))
    print("baseline:", baseline["run"]["ledger"]["total"], "samples")

    lb = rc.Instance.lower_bound(10, 4, 0.25, 0.2, 1)
    assert lb.truthful_mask.count(False) == 2
    assert isinstance(lb.query(0), tuple)

    config = json.dumps({"bins": 50, "c_bins": 3.0, "delta": 0.1, "budget_scale": 1.0})
    report = json.loads(rc.verify("balls-in-bins", config, 200, 7))
    assert report["passed"], report
    verdict = json.loads(rc.verify("centralized-impossibility", json.dumps({"n": 4}), 1, 0))
    assert verdict["passed"]

    code, out, err = rc.cli(["verify", "--check", "pac", "--trials", "50", "--seed", "3"])
    assert code == 0, err
    assert json.loads(out)["config"]["seed"] == 3
    code, _, err = rc.cli(["verify", "--check", "pac", "--eps", "2", "--seed", "3"])
    assert code == 2 and "--eps" in err

    try:
        rc.HypothesisClass.powerset(0)
    except ValueError:
        pass
    else:
        raise AssertionError("powerset(0) should fail")
    print("smoke test passed")


if __name__ == "__main__":
    main()
