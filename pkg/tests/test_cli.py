import json
import subprocess
import sys

import numpy as np
import pytest

from bosecount.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, EXIT_PHYSICS, main, read_csv
from bosecount.config import load_config, parse_config
from bosecount.errors import ConfigError
from bosecount.kernel.mixture import mixture_joint

HOMODYNE = [
    {"r_aa": 0.5, "r_bb": 0.5, "r_ab_modulus": 0.5, "theta": 0.0},
    {"r_aa": 0.5, "r_bb": 0.5, "r_ab_modulus": 0.5, "theta": 3.141592653589793},
]


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run(tmp_path, cmd, doc, *extra, out="out"):
    cfg = write(tmp_path, doc)
    return main([cmd, "--config", cfg, "--out", str(tmp_path / out), *extra])


def test_config_defaults():
    cfg = parse_config({"sources": [{"family": "fock", "n": 1}] * 2, "detectors": HOMODYNE})
    assert (cfg.phase_nodes, cfg.radial_nodes, cfg.budget, cfg.tail_tolerance) == (256, 48, 10**7, 1e-10)
    assert cfg.conditioning is None and cfg.scaling is None


@pytest.mark.parametrize("doc,field", [
    ({"detectors": HOMODYNE}, "sources"),
    ({"sources": [{"family": "fock", "n": 1}], "detectors": HOMODYNE}, "sources"),
    ({"sources": [{"family": "fock", "n": 1}] * 2, "detectors": [{"r_aa": "x", "r_bb": 0.1}]}, "detectors[0].r_aa"),
    ({"sources": [{"family": "poisson", "mean": -2}] * 2, "detectors": HOMODYNE}, "sources[0]"),
    ({"sources": [{"family": "fock", "n": 1}] * 2, "detectors": HOMODYNE, "conditioning": {"count": 3}}, "conditioning.detector_index"),
    ({"sources": [{"family": "fock", "n": 1}] * 2, "detectors": HOMODYNE, "extra": 1}, "<root>"),
    ({"sources": [{"family": "fock", "n": 1}] * 2, "detectors": HOMODYNE, "sweep": {"parameter": "zz", "values": [1]}}, "sweep.parameter"),
])
def test_config_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        parse_config(doc)


def test_json_syntax_error_has_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "sources": [\n  oops\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(p)


def test_vacuum_joint(tmp_path):
    doc = {"sources": [{"family": "fock", "n": 0}] * 2, "detectors": {"paper_pair": {"R": 0.867}}}
    assert run(tmp_path, "joint", doc) == EXIT_OK
    meta, cols, rows = read_csv(tmp_path / "out" / "joint.csv")
    assert cols == ["n1", "n2", "probability"] and rows == [["0", "0", "1"]]
    _, _, summary = read_csv(tmp_path / "out" / "summary.csv")
    assert dict(summary)["total_mass"] == "1"


def test_hom_joint(tmp_path):
    doc = {"sources": [{"family": "fock", "n": 1}] * 2, "detectors": HOMODYNE}
    assert run(tmp_path, "joint", doc) == EXIT_OK
    _, _, rows = read_csv(tmp_path / "out" / "joint.csv")
    got = {(int(a), int(b)): float(p) for a, b, p in rows}
    assert got[(2, 0)] == pytest.approx(0.5, abs=1e-12) and got[(0, 2)] == pytest.approx(0.5, abs=1e-12)
    assert got.get((1, 1), 0.0) <= 1e-12
    assert set(got) <= {(2, 0), (0, 2), (1, 1)}


def test_csv_round_trip_is_exact(tmp_path):
    doc = {"sources": [{"family": "binomial", "n": 5, "q": 0.3}, {"family": "fock", "n": 4}],
           "detectors": {"paper_pair": {"R": 0.7}}}
    assert run(tmp_path, "joint", doc) == EXIT_OK
    cfg = parse_config(doc)
    table = mixture_joint(*cfg.build_sources(), cfg.build_array()).table
    _, _, rows = read_csv(tmp_path / "out" / "joint.csv")
    assert len(rows) == np.count_nonzero(table.probs)
    for a, b, p in rows:
        assert float(p) == table[(int(a), int(b))]


def test_outputs_are_deterministic(tmp_path):
    doc = {"sources": [{"family": "poisson", "mean": 4.0}, {"family": "gamma_p", "mean": 3.0, "Q": 0.3}],
           "detectors": {"paper_pair": {"R": 0.8}}, "conditioning": {"detector_index": 1, "count": 3}}
    assert run(tmp_path, "conditional", doc, out="a") == EXIT_OK
    assert run(tmp_path, "conditional", doc, out="b") == EXIT_OK
    for name in ("conditional.csv", "peaks.csv", "estimate.csv"):
        a = (tmp_path / "a" / name).read_text().splitlines()
        b = (tmp_path / "b" / name).read_text().splitlines()
        assert a[0].startswith("# generated:") and a[1:] == b[1:]


def test_warm_and_cold_cache_outputs_identical(tmp_path):
    doc = {"sources": [{"family": "binomial", "n": 6, "q": 0.5}, {"family": "fock", "n": 3}],
           "detectors": {"paper_pair": {"R": 0.6}}}
    cache = str(tmp_path / "kc")
    assert run(tmp_path, "joint", doc, "--cache", cache, out="cold") == EXIT_OK
    assert run(tmp_path, "joint", doc, "--cache", cache, out="warm") == EXIT_OK
    a = (tmp_path / "cold" / "joint.csv").read_text().splitlines()[1:]
    b = (tmp_path / "warm" / "joint.csv").read_text().splitlines()[1:]
    assert a == b


def test_cache_subcommands(tmp_path, capsys):
    doc = {"sources": [{"family": "fock", "n": 2}] * 2, "detectors": {"paper_pair": {"R": 0.6}}}
    cache = str(tmp_path / "kc")
    assert run(tmp_path, "joint", doc, "--cache", cache) == EXIT_OK
    capsys.readouterr()
    assert main(["cache", "stat", "--cache", cache]) == EXIT_OK
    assert "files: 1" in capsys.readouterr().out
    assert main(["cache", "clear", "--cache", cache]) == EXIT_OK
    assert "removed 1" in capsys.readouterr().out


def test_exit_codes(tmp_path):
    fock = [{"family": "fock", "n": 2}] * 2
    assert run(tmp_path, "joint", {"sources": fock, "detectors": "nope"}) == EXIT_CONFIG
    over = {"sources": fock, "detectors": {"paper_pair": {"R": 0.867, "dtheta_over_pi": 0.5}}}
    assert run(tmp_path, "joint", over) == EXIT_PHYSICS
    big = {"sources": [{"family": "fock", "n": 40}] * 2, "detectors": {"paper_pair": {"R": 0.5}}}
    assert run(tmp_path, "joint", big, "--budget", "1000") == EXIT_BUDGET
    neg = {"sources": fock, "detectors": {"paper_pair": {"R": 0.5}}, "conditioning": {"detector_index": 1, "count": 9}}
    assert run(tmp_path, "conditional", neg) == EXIT_PHYSICS
    assert run(tmp_path, "conditional", {"sources": fock, "detectors": {"paper_pair": {"R": 0.5}}}) == EXIT_CONFIG
    assert main(["joint"]) == EXIT_CONFIG


def test_negligible_evidence_reports_nearest(tmp_path, capsys):
    doc = {"sources": [{"family": "fock", "n": 2}] * 2, "detectors": {"paper_pair": {"R": 0.5}},
           "conditioning": {"detector_index": 1, "count": 9}}
    run(tmp_path, "conditional", doc)
    assert "nearest supported count is 4" in capsys.readouterr().err


def test_independence_conditional(tmp_path):
    doc = {"sources": [{"family": "fock", "n": 3}, {"family": "fock", "n": 2}],
           "detectors": [{"r_aa": 0.5, "r_bb": 0.0, "r_ab_modulus": 0.0}, {"r_aa": 0.0, "r_bb": 0.5, "r_ab_modulus": 0.0}],
           "conditioning": {"detector_index": 1, "count": 1}}
    assert run(tmp_path, "conditional", doc) == EXIT_OK
    _, _, est = read_csv(tmp_path / "out" / "estimate.csv")
    assert dict(est)["status"] == "degenerate_detector"
    _, _, rows = read_csv(tmp_path / "out" / "conditional.csv")
    got = {int(n): float(p) for n, p in rows}
    expected = {0: 0.25, 1: 0.5, 2: 0.25}
    assert all(got.get(n, 0.0) == pytest.approx(expected.get(n, 0.0), abs=1e-14) for n in set(got) | set(expected))


def test_scaling_check(tmp_path):
    base = {"sources": [{"family": "poisson", "mean": 6.0}] * 2,
            "detectors": [{"r_aa": 0.2, "r_bb": 0.1, "theta": 0.3}, {"r_aa": 0.1, "r_bb": 0.25, "theta": 2.5}],
            "backend": "Network"}
    assert run(tmp_path, "scaling-check", {**base, "scaling": {"q": 1.0}}, out="q1") == EXIT_OK
    _, _, rows = read_csv(tmp_path / "q1" / "scaling.csv")
    assert float(rows[0][1]) == 0.0
    assert run(tmp_path, "scaling-check", {**base, "scaling": {"q": 0.5}}, out="q5") == EXIT_OK
    _, _, rows = read_csv(tmp_path / "q5" / "scaling.csv")
    assert float(rows[0][1]) < 1e-8
    assert (tmp_path / "q5" / "scaling_renormalized.csv").exists()
    assert run(tmp_path, "scaling-check", {**base, "scaling": {"q": 0.2}}, out="q2") == EXIT_PHYSICS


def test_sweep_records_failures_and_continues(tmp_path):
    doc = {"sources": [{"family": "poisson", "mean": 20.0}] * 2,
           "detectors": {"paper_pair": {"R": 0.867}},
           "conditioning": {"detector_index": 1, "count": 20},
           "sweep": {"parameter": "dtheta_over_pi", "values": [0.5, 0.95, 1.0]}}
    assert run(tmp_path, "sweep", doc) == EXIT_OK
    _, cols, rows = read_csv(tmp_path / "out" / "sweep.csv")
    status = {float(r[0]): r[1] for r in rows}
    assert status[0.5] == "OverComplete"
    assert status[0.95] in ("ok", "washed_out") and status[1.0] in ("ok", "washed_out")
    assert (tmp_path / "out" / "sweep_conditionals.csv").exists()


def test_sweep_q_broadens(tmp_path):
    doc = {"sources": [{"family": "gamma_p", "mean": 30 / 0.8, "Q": 0.01}] * 2,
           "detectors": {"paper_pair": {"R": 0.8}},
           "conditioning": {"detector_index": 1, "count": 36},
           "sweep": {"parameter": "Q", "values": [0.001, 0.05, 0.3, 1.0]}}
    assert run(tmp_path, "sweep", doc) == EXIT_OK
    _, cols, rows = read_csv(tmp_path / "out" / "sweep.csv")
    ratios = [float(r[cols.index("max_width_ratio")]) for r in rows]
    assert all(a <= b for a, b in zip(ratios, ratios[1:]))


def test_sweep_r_with_coherent_limit(tmp_path):
    doc = {"sources": [{"family": "fock", "n": 20}] * 2,
           "detectors": {"paper_pair": {"R": 0.8}},
           "conditioning": {"detector_index": 1, "count": 20},
           "sweep": {"parameter": "R", "values": [0, 0.6, 0.8]}}
    assert run(tmp_path, "sweep", doc) == EXIT_OK
    _, cols, rows = read_csv(tmp_path / "out" / "sweep.csv")
    assert [r[1] for r in rows] == ["ok"] * 3


def test_sweep_n1_and_q(tmp_path):
    doc = {"sources": [{"family": "fock", "n": 10}] * 2,
           "detectors": {"paper_pair": {"R": 0.4}},
           "conditioning": {"detector_index": 1, "count": 4},
           "sweep": {"parameter": "n1", "values": [2, 4, 30]}}
    assert run(tmp_path, "sweep", doc, out="n1") == EXIT_OK
    _, _, rows = read_csv(tmp_path / "n1" / "sweep.csv")
    assert rows[2][1] == "NegligibleEvidence"
    doc["sweep"] = {"parameter": "q", "values": [0.5, 1.0]}
    assert run(tmp_path, "sweep", doc, out="q") == EXIT_OK
    _, cols, rows = read_csv(tmp_path / "q" / "sweep.csv")
    loc, ratio = cols.index("peak_locations"), cols.index("max_width_ratio")
    assert rows[0][loc] == rows[1][loc]
    assert float(rows[0][ratio]) == pytest.approx(float(rows[1][ratio]), rel=1e-9)


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, {"sources": [{"family": "fock", "n": 1}] * 2, "detectors": HOMODYNE})
    r = subprocess.run([sys.executable, "-m", "bosecount", "joint", "--config", cfg, "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "o" / "joint.csv").exists()
