"""Smoke test for the relaysched Python extension.

Build and install first, for example:

    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/relaysched-*.whl
    python python/smoke_test.py
"""

import math

import relaysched as rs


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    # one user, one relay: outage has a two-exponential closed form
    cfg = rs.NetworkConfig([[2.0]], [0.5], alpha=0.6, snr_db=10.0)
    eta = 10.0
    expect = 1 - math.exp(-3 / (0.6 * eta * 2.0)) * math.exp(-3 / (0.4 * eta * 0.5))
    assert close(rs.outage_exact(cfg, 10.0), expect), rs.outage_exact(cfg, 10.0)
    assert close(rs.outage_tdma(cfg, 10.0), expect)

    try:
        rs.NetworkConfig([[1.0]], [1.0], alpha=1.2)
    except ValueError as e:
        assert "alpha" in str(e), e
    else:
        raise AssertionError("alpha = 1.2 accepted")

    table = rs.NetworkConfig.table_one()
    assert (table.num_users, table.num_relays) == (8, 5)
    assert table.mean_gain_rb == [1.2, 0.6, 0.5, 1.3, 0.7]
    assert rs.outage_lower_bound(table, 10.0) <= rs.outage_exact(table, 10.0) <= rs.outage_tdma(table, 10.0)
    assert close(rs.power_gap_db(0.5), 10 * math.log10(2))

    # selection: relay 1 has the larger bottleneck
    real = rs.ChannelRealization([[5.0, 3.0]], [1.0, 4.0])
    unit = rs.NetworkConfig([[1.0, 1.0]], [1.0, 1.0], snr_db=10 * math.log10(2))
    sel = rs.select_relay_min_max(0, real, unit)
    assert sel["relay"] == 1 and close(sel["metric"], 3.0), sel
    theta = rs.select_relay_method_theta(0, real, unit)
    assert theta["relay"] == 1 and sel["decoding_set"] == [0, 1]
    assert not rs.is_outage(0, real, unit)

    groups = rs.make_grouping("similar_gain", 2, table)
    assert sorted(u for g in groups for u in g) == list(range(8))
    fading = rs.FadingProcess(table.with_snr_db(10.0), seed=3)
    slot = rs.schedule("relaxed", 5, fading.draw(), table.with_snr_db(10.0), groups=groups)
    assert slot["user"] in groups[5 % len(groups)]

    assert close(rs.jain_index([1.0, 1.0, 1.0, 1.0]), 1.0)
    assert close(rs.jain_index([1.0, 0.0, 0.0, 0.0]), 0.25)
    assert close(rs.fi_lower_bound(2, 8), 0.5)
    mean, var = rs.delay_statistics([[4, 4, 4], [4, 4]], 0.002)
    assert close(mean, 0.008) and var == 0.0

    snr = [float(s) for s in range(0, 41)]
    curve = [rs.outage_exact(table, s) for s in snr]
    slope = rs.estimate_diversity_order(snr, curve, lo=1e-10, hi=1e-2)
    assert 4.0 < slope < 5.0, slope

    rows = rs.simulate(table, [4.0], [rs.Policy.tdma(), rs.Policy.greedy()], trials=20_000, seed=7)
    assert [r["policy"] for r in rows] == ["tdma", "greedy"]
    for r in rows:
        half = 3 * (r["ci_high"] - r["ci_low"])
        assert abs(r["outage"] - r["analytic"]) <= half, r

    curves = rs.fairness_experiment(
        rs.NetworkConfig.homogeneous(4, 3), 10.0, [rs.Policy.relaxed(2), rs.Policy.greedy()], [1.0, 10.0], trials=20_000
    )
    assert all(0.25 <= fi <= 1.0 for c in curves for fi in c["mean_fi"])
    print("relaysched", rs.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
