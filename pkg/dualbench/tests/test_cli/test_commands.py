"""
Test command-line experiments
"""
import json

import pytest

from dualbench.cli.main import build_parser, main

CHAIN3 = {"sites": [1, 2, 3], "edges": [[1, 2], [2, 3]]}


def _experiment(model, run, graph=None):
    return {"model": model, "graph": graph or CHAIN3, "run": run}


def _results(out):
    return json.loads((out / "results.json").read_text(encoding="utf-8"))


def test_catalog_lists_models(capsys):
    assert main(["catalog"]) == 0

    listing = capsys.readouterr().out
    assert "sip → rate 2ξ_i(2ξ_j+m)" in listing
    assert "kmp → instantaneous thermalization" in listing
    assert "dual_absorbing_sep2j" in listing


def test_catalog_is_stable(capsys):
    main(["catalog"])
    first = capsys.readouterr().out
    main(["catalog"])

    assert capsys.readouterr().out == first


def test_run_requires_config():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run"])


def test_check_duality_passes(write_config, tmp_out):
    path = write_config(_experiment({"kind": "sep2j", "j": 1},
                                    {"experiment": "check-duality"}))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0

    results = _results(tmp_out)
    assert results["passed"] is True
    assert results["experiment"] == "check-duality"
    assert all(r["residual"] == "0" for r in results["records"])
    assert any("conjugacy D=SCQ^-1" in r["identity"] for r in results["records"])
    assert (tmp_out / "report.txt").read_text(encoding="utf-8").rstrip().endswith("PASS")


def test_check_algebra_passes(write_config, tmp_out):
    path = write_config(_experiment({"kind": "sip", "m": 2},
                                    {"experiment": "check-algebra", "cutoff": 5}))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0


def test_kmp_profile_table(write_config, tmp_out):
    graph = {"sites": [1, 2, 3, 4], "edges": [[1, 2], [2, 3], [3, 4]], "boundary": [1, 4]}
    path = write_config(_experiment({"kind": "kmp", "m": 2, "T": {"1": 1, "4": 2}},
                                    {"experiment": "profile"}, graph))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0

    lines = (tmp_out / "profile.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "site,mean,value"
    assert [line.split(",")[1] for line in lines[1:]] == ["18/7", "20/7", "22/7", "24/7"]


def test_sep_profile_with_correlations(write_config, tmp_out):
    graph = {"sites": [1, 2, 3, 4, 5], "edges": [[1, 2], [2, 3], [3, 4], [4, 5]],
             "boundary": ["1", "5"]}
    path = write_config(_experiment({"kind": "sep", "rho": {"1": "1/4", "5": "3/4"}},
                                    {"experiment": "profile", "correlations": True}, graph))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0

    results = _results(tmp_out)
    means = [row["mean"] for row in results["tables"]["profile"]]
    assert means == ["1/3", "5/12", "1/2", "7/12", "2/3"]
    assert (tmp_out / "correlations.csv").exists()


def test_malformed_json_is_config_error(tmp_path, tmp_out):
    path = tmp_path / "broken.json"
    path.write_text("{\"model\": ", encoding="utf-8")

    assert main(["run", "--config", str(path), "--out", str(tmp_out)]) == 2


def test_missing_file_is_config_error(tmp_path, tmp_out):
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_out)]) == 2


def test_unknown_key_is_config_error(write_config, tmp_out):
    data = _experiment({"kind": "sep2j", "j": 1, "colour": "red"},
                       {"experiment": "check-duality"})

    assert main(["run", "--config", write_config(data), "--out", str(tmp_out)]) == 2


def test_rho_and_t_together_is_config_error(write_config, tmp_out):
    graph = dict(CHAIN3, boundary=[1, 3])
    data = _experiment({"kind": "boundary_sep2j", "j": 1, "rho": {"1": 0.5}, "T": {"3": 1}},
                       {"experiment": "profile"}, graph)

    assert main(["run", "--config", write_config(data), "--out", str(tmp_out)]) == 2


def test_failing_check_exit_code(write_config, tmp_out):
    """An impossible threshold turns the comparison with the exact means into failures"""
    graph = {"sites": [1, 2], "edges": [[1, 2]]}
    data = _experiment({"kind": "irw"},
                       {"experiment": "simulate", "eta0": [1, 0], "t": 0.5,
                        "samples": 200, "sigma": 1e-9}, graph)

    assert main(["run", "--config", write_config(data), "--out", str(tmp_out)]) == 1
    results = _results(tmp_out)
    assert results["passed"] is False
    assert results["failures"]


def test_seed_override_is_recorded(write_config, tmp_out):
    data = _experiment({"kind": "sep2j", "j": 1}, {"experiment": "check-duality", "seed": 3})

    main(["run", "--config", write_config(data), "--out", str(tmp_out), "--seed", "42"])
    assert _results(tmp_out)["seed"] == 42


def test_results_are_reproducible(write_config, tmp_path):
    """Same file and seed give byte-identical results.json"""
    data = _experiment({"kind": "sep2j", "j": 1},
                       {"experiment": "simulate", "eta0": [2, 1, 0], "t": 0.5,
                        "samples": 200, "seed": 9})
    path = write_config(data)
    first, second = tmp_path / "first", tmp_path / "second"

    main(["run", "--config", path, "--out", str(first)])
    main(["run", "--config", path, "--out", str(second)])

    assert (first / "results.json").read_bytes() == (second / "results.json").read_bytes()
    assert (first / "sites.csv").exists()


def test_results_do_not_depend_on_threads(write_config, tmp_path):
    data = _experiment({"kind": "irw"},
                       {"experiment": "simulate", "eta0": [2, 0, 1], "t": 0.5,
                        "samples": 100})
    path = write_config(data)

    main(["run", "--config", path, "--out", str(tmp_path / "one")])
    main(["run", "--config", path, "--out", str(tmp_path / "four"), "--threads", "4"])

    assert ((tmp_path / "one" / "results.json").read_bytes()
            == (tmp_path / "four" / "results.json").read_bytes())


BOUNDARY3 = {"sites": [1, 2, 3], "edges": [[1, 2], [2, 3]], "boundary": [1, 3]}


@pytest.mark.slow
def test_sep_profile_cross_check(write_config, tmp_out):
    graph = {"sites": [1, 2, 3, 4, 5], "edges": [[1, 2], [2, 3], [3, 4], [4, 5]],
             "boundary": ["1", "5"]}
    path = write_config(_experiment({"kind": "sep", "rho": {"1": "1/4", "5": "3/4"}},
                                    {"experiment": "profile", "cross_check": True, "t": 40,
                                     "samples": 2000, "seed": 11, "sigma": 4}, graph))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0

    comparisons = _results(tmp_out)["comparisons"]
    assert len(comparisons) == 5
    assert all(c["passed"] for c in comparisons)


def test_energy_profile_cross_check(write_config, tmp_out):
    path = write_config(_experiment({"kind": "boundary_bep", "m": 2, "T": {"1": 1, "3": 2}},
                                    {"experiment": "profile", "cross_check": True, "t": 15,
                                     "samples": 800, "sigma": 4}, BOUNDARY3))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0

    results = _results(tmp_out)
    assert [c["label"] for c in results["comparisons"]] == [
        "long-run mean at 1 (t=15)", "long-run mean at 2 (t=15)", "long-run mean at 3 (t=15)"]


def test_profile_without_cross_check_has_no_comparisons(write_config, tmp_out):
    path = write_config(_experiment({"kind": "boundary_bep", "m": 2, "T": {"1": 1, "3": 2}},
                                    {"experiment": "profile"}, BOUNDARY3))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0
    assert _results(tmp_out)["comparisons"] == []


def test_profile_with_isolated_site_fails(write_config, tmp_out):
    graph = {"sites": [1, 2, 3], "edges": [[1, 2]], "boundary": [1]}
    path = write_config(_experiment({"kind": "boundary_sep2j", "j": 1, "rho": {"1": "1/2"}},
                                    {"experiment": "profile"}, graph))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 1


@pytest.mark.slow
def test_bmp_mc_duality(write_config, tmp_out):
    path = write_config(_experiment({"kind": "bmp", "levels": 1},
                                    {"experiment": "mc-duality", "eta0": [1.0, -0.5, 0.8],
                                     "xi0": [1, 0, 1], "t": 0.5, "samples": 2000, "seed": 5,
                                     "sigma": 4}))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0

    (comparison,) = _results(tmp_out)["comparisons"]
    assert comparison["label"] == "bmp duality at t=0.5"
    assert comparison["passed"]


@pytest.mark.slow
def test_boundary_bep_mc_duality(write_config, tmp_out):
    path = write_config(_experiment({"kind": "boundary_bep", "m": 2, "T": {"1": 1, "3": 2}},
                                    {"experiment": "mc-duality", "eta0": [0.5, 1.0, 1.5],
                                     "xi0": [1, 1, 0], "t": 0.5, "samples": 2000, "seed": 7,
                                     "sigma": 4}, BOUNDARY3))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0
    assert _results(tmp_out)["comparisons"][0]["passed"]


def test_multilevel_bmp_mc_duality_is_unsupported(write_config, tmp_out):
    path = write_config(_experiment({"kind": "bmp", "levels": 2},
                                    {"experiment": "mc-duality", "eta0": [1, 0, 0, 1, 0, 0],
                                     "xi0": [1, 0, 0]}))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 1


@pytest.mark.parametrize("model,identity", [
    ({"kind": "bmp", "levels": 1}, "BMP vs SIP(1)"),
    ({"kind": "bep", "m": 3}, "BEP vs SIP"),
    ({"kind": "hermite"}, "Hermite diffusion vs walkers"),
])
def test_check_duality_of_diffusions(write_config, tmp_out, model, identity):
    path = write_config(_experiment(model, {"experiment": "check-duality", "sector": 3}))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0
    assert identity in [r["identity"] for r in _results(tmp_out)["records"]]


def test_check_duality_of_boundary_bep(write_config, tmp_out):
    path = write_config(_experiment({"kind": "dual_absorbing_sip", "m": 2, "T": {"1": 1, "3": 2}},
                                    {"experiment": "check-duality", "sector": 3}, BOUNDARY3))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0
    assert _results(tmp_out)["records"][0]["identity"] == "boundary BEP vs absorbing SIP"


def test_limits_in_m_report_simulated_flow(write_config, tmp_out):
    graph = {"sites": [1, 2], "edges": [[1, 2]]}
    path = write_config(_experiment({"kind": "bep", "m": 2},
                                    {"experiment": "limits", "xi0": [1, 0], "eta0": [2.0, 0.0],
                                     "m_values": [1, 4, 16], "t": 0.5, "samples": 1000,
                                     "sigma": 4}, graph))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0

    results = _results(tmp_out)
    rows = results["tables"]["limit_m"]
    assert all(row["simulated_z"] != "" for row in rows)
    identities = [r["identity"] for r in results["records"]]
    assert "exact mean within 1e-3 of the rate-2 flow" in identities
    assert "simulated mean within 4 sigma of the rate-2 flow" in identities


def test_simulate_boundary_bep_against_moment_flow(write_config, tmp_out):
    path = write_config(_experiment({"kind": "boundary_bep", "m": 2, "T": {"1": 1, "3": 2}},
                                    {"experiment": "simulate", "eta0": [0.5, 1.0, 1.5],
                                     "t": 0.5, "samples": 1000, "sigma": 4}, BOUNDARY3))

    assert main(["run", "--config", path, "--out", str(tmp_out)]) == 0

    results = _results(tmp_out)
    assert [row["site"] for row in results["tables"]["sites"]] == ["1", "2", "3"]
    assert all("exact" in row for row in results["tables"]["sites"])
    assert not any("conserved" in r["identity"] for r in results["records"])
