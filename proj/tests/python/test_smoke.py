import math
import pathlib

import pytest

import maestro

CONFIGS = pathlib.Path(__file__).resolve().parents[2] / "configs"


def test_price_law():
    alpha = maestro.fit_alpha(70, 0.88, 8, 0.18)
    assert alpha == pytest.approx(math.log(0.88 / 0.18) / math.log(70 / 8), abs=1e-12)
    assert round(maestro.extrapolate_price(3, 7, 0.30, alpha), 2) == 0.16
    fitted, table = maestro.default_prices()
    assert fitted == pytest.approx(alpha)
    assert table["Qwen2.5-3B"][2] is True
    assert "0.73" in maestro.price_fit_report()


def test_call_cost():
    assert maestro.call_cost(1000, 500, 0.30, 0.30) == pytest.approx(0.00045)


def test_confidence():
    assert maestro.conf_base([-0.4] * 17) == -0.4
    assert maestro.conf_adj(0.0, [], 0) == 1.0
    y = maestro.conf_adj(-1.0, [-3.0, -2.0, -1.0, 0.0], 4, warmup=4)
    assert 0.0 <= y <= 1.0
    with pytest.raises(maestro.ContractError):
        maestro.conf_base([])


def test_selection():
    assert len(maestro.select_roles([1 / 9] * 9, 0.3)) == 3
    assert maestro.select_roles([0.1, 0.6, 0.3], 0.5) == [1]


def test_judge():
    assert maestro.judge("so\nAnswer: 12.", "12") == 1
    assert maestro.normalize_answer(" +4.0 ") == "4"


def test_bad_config(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"backends": [{"model": "Mystery-1B"}]}')
    with pytest.raises(maestro.ConfigError):
        maestro.Session(p)


def test_session_route_and_checkpoint(tmp_path):
    s = maestro.Session(CONFIGS / "mock.json")
    ep = s.route("What is 2+2?")
    assert ep["summary"]["final_answer"] == "4"
    assert 1 <= len(ep["turns"]) <= 4
    s.save(tmp_path / "c.json")
    s.load(tmp_path / "c.json")
    assert s.step == 0


def test_session_train_eval():
    s = maestro.Session(CONFIGS / "synthetic.json")
    train, test = s.split(maestro.arithmetic_tasks(100, 0.7, 11))
    assert (len(train), len(test)) == (80, 20)
    curve = s.train(train[:40])
    assert curve and s.step == len(curve)
    report = s.evaluate(test)
    forced = s.evaluate(test, disable_model_router=True)
    assert report["episodes"] == forced["episodes"] == 20
    assert 0.0 <= forced["accuracy"] <= 1.0
    assert forced["mean_cost"] > 0.0
