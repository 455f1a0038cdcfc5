import io
import json

import pytest

from qsure import cli, files
from qsure.errors import ValidationError
from qsure.files import FIXTURES

FIXTURE_NAMES = sorted(p.stem for p in FIXTURES.glob("*.json"))


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, err = run(*argv)
    assert code == 0, err
    return json.loads(out)


# -- files --------------------------------------------------------------------------------

@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixtures_load_and_round_trip(name, tmp_path):
    mf = files.load(name)
    path = tmp_path / f"{name}.json"
    path.write_text(files.dump_model(mf))
    again = files.load(str(path))
    assert again.model == mf.model
    assert again.family == mf.family
    assert again.payoffs == mf.payoffs


def _binomial_dict():
    return json.loads((FIXTURES / "binomial.json").read_text())


def test_unnormalized_prior_reports_index():
    data = _binomial_dict()
    data["priors"].append({"up": "0.5", "down": "0.4"})
    with pytest.raises(ValidationError) as exc:
        files.parse_model(data)
    assert any("priors[2]" in issue for issue in exc.value.issues)


def test_unknown_label_in_prices():
    data = _binomial_dict()
    data["prices"][1][0] = {"up": 2, "sideways": "1/2"}
    with pytest.raises(ValidationError) as exc:
        files.parse_model(data)
    assert any("sideways" in issue for issue in exc.value.issues)


def test_numbers_decimal_and_fraction():
    data = _binomial_dict()
    data["prices"][1][0] = ["2.0", "1/2"]
    mf = files.parse_model(data)
    assert mf.model.prices[1][0] == (2, files.Fraction(1, 2))


def test_bad_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{ not json")
    code, _, err = run("validate", "--model", str(p))
    assert code == 2 and "parse error" in err


# -- commands -----------------------------------------------------------------------------

def test_price_exact_report():
    code, out, _ = run("price", "--model", "binomial", "--payoff", "call", "--mode", "exact")
    assert code == 0
    assert '"price": "1/3"' in out
    rep = json.loads(out)
    assert rep["results"]["gap"] == "0"
    assert rep["certificates"]["dual_measure"] == {"up": "1/3", "down": "2/3"}
    assert rep["certificates"]["strategy"][0]["holding"] == "2/3"


def test_price_float_report_rounding():
    rep = run_json("price", "--model", "binomial", "--payoff", "call")
    assert rep["results"]["price"] == 0.333333333333


def test_na_arbitrage_is_a_verdict():
    rep = run_json("na", "--model", "arb1")
    assert rep["verdicts"]["na"] == "arbitrage"
    assert rep["verdicts"]["ftap_agree"] is True
    assert rep["certificates"]["outcome"] == "up"


def test_capacity_event():
    rep = run_json("capacity", "--model", "binomial", "--event", "up")
    assert rep["results"]["capacity"] == 1.0


def test_martingale_measures_csv():
    code, out, _ = run("martingale-measures", "--model", "two_period", "--format", "csv", "--mode", "exact")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "vertex,uu,ud,du,dd"
    assert lines[1:] == ["0,1/9,2/9,2/9,4/9"]


def test_validate_polar():
    rep = run_json("validate", "--model", "polar")
    assert rep["results"]["polar"] == ["mid"]


def test_risk_and_reduce_and_sensitivity():
    rep = run_json("risk", "--model", "two_period", "--payoff", "lookback", "--functional", "avar", "--mode", "exact")
    assert rep["results"]["value"] == rep["results"]["bidual"]
    rep = run_json("reduce", "--model", "polar")
    assert rep["verdicts"]["equivalent"] is True
    rep = run_json("sensitivity", "--model", "binomial", "--functional", "worst_case", "--level", "0")
    assert rep["verdicts"]["sensitivity"] == "certified_ok"


def test_usage_errors_exit_2():
    assert run("frobnicate", "--model", "binomial")[0] == 2
    assert run("price", "--model", "binomial", "--bogus")[0] == 2
    assert run("price", "--model", "binomial")[0] == 2
    assert run("price", "--model", "no_such_model", "--payoff", "call")[0] == 2


def test_invariant_breach_exit_3(monkeypatch):
    from qsure.errors import InvariantError

    def broken(*args, **kw):
        raise InvariantError("nonzero duality gap")

    monkeypatch.setattr(cli.market, "superhedge", broken)
    code, _, err = run("price", "--model", "binomial", "--payoff", "call", "--mode", "exact")
    assert code == 3 and "duality gap" in err


@pytest.mark.parametrize("argv", [
    ("price", "--model", "two_period", "--payoff", "lookback", "--mode", "exact"),
    ("sensitivity", "--model", "polar", "--functional", "entropic", "--seed", "3", "--level", "1"),
    ("martingale-measures", "--model", "binomial", "--format", "csv"),
])
def test_output_is_byte_deterministic(argv):
    assert run(*argv)[1] == run(*argv)[1]


def test_digest_changes_with_inputs():
    a = run_json("price", "--model", "binomial", "--payoff", "call")
    b = run_json("price", "--model", "binomial", "--payoff", "put")
    assert a["inputs"]["digest"] != b["inputs"]["digest"]
