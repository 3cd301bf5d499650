import pytest

from lctsindy import config as cfgmod
from lctsindy.config import ConfigError

SMALL = """
model = "hes1"
seed = 3
params.tau = 20.0
params.p = 2
sim.t_end = 300.0
sim.dt = 0.1
smoother.window_span = 2.0
library.poly_degree = 1
library.hill_target = "z"
grid.taus = [15.0, 20.0]
grid.ps = [1, 2]
noise.level = 0.01
"""


def test_loads_resolves_sections():
    cfg = cfgmod.loads(SMALL, "small")
    assert cfg.name == "small" and cfg.model == "hes1"
    assert cfg.params.tau == 20.0 and cfg.params.p == 2
    assert cfg.sim["t_end"] == 300.0 and cfg.sim["history"] == [3.0, 100.0]
    assert cfg.identify.smoother.window_span == 2.0
    assert cfg.identify.library.hill_features[0].P0 == 100.0
    assert len(cfg.grid) == 4 and cfg.method == "lct"
    assert cfg.noise.seed == 3
    assert cfg.runs() == [("run", cfg.noise)]


def test_round_trip_through_flat_text():
    cfg = cfgmod.loads(SMALL, "small")
    again = cfgmod.loads(cfgmod.dumps(cfg.raw), "small")
    assert again.raw == cfg.raw
    assert again == cfg
    text = cfgmod.dumps(cfg.raw)
    assert text == cfgmod.dumps(again.raw)
    assert "smoother.window_span = 2.0\n" in text


def test_flatten_unflatten():
    nested = {"a": {"b": 1, "c": {"d": [1, 2]}}, "e": "x"}
    flat = cfgmod.flatten(nested)
    assert flat == {"a.b": 1, "a.c.d": [1, 2], "e": "x"}
    assert cfgmod.unflatten(flat) == nested


def test_replicate_runs():
    cfg = cfgmod.loads(SMALL + "noise.levels = [0.0, 0.1]\nnoise.replicates = 2\n")
    tags = [t for t, _ in cfg.runs()]
    assert tags == ["eta0_seed3", "eta0_seed4", "eta0.1_seed3", "eta0.1_seed4"]


def test_tau_range_is_exact():
    cfg = cfgmod.bundled("table6_noise0")
    assert len(cfg.grid.taus) == 101
    assert 1.59 in cfg.grid.taus and cfg.grid.taus[-1] == 2.0


@pytest.mark.parametrize(
    "extra, path",
    [
        ("bogus = 1\n", "bogus"),
        ("smoother.window = 3\n", "smoother.window"),
        ("params.mu_m = -1.0\n", "params"),
        ("sim.bogus = 0\n", "sim.bogus"),
        ("identify.method = \"magic\"\n", "identify.method"),
        ("grid.extra = 1\n", "grid.extra"),
        ("library.hill_P0 = -5.0\n", "library.hill_P0"),
        ("stridge.threshold = 0.0\n", "stridge"),
        ("output.colour = true\n", "output.colour"),
    ],
)
def test_errors_name_the_key(extra, path):
    with pytest.raises(ConfigError, match=rf"^{path}"):
        cfgmod.loads(SMALL + extra)


def test_model_and_method_errors():
    with pytest.raises(ConfigError, match="^model"):
        cfgmod.loads(SMALL.replace('"hes1"', '"lorenz"'))
    with pytest.raises(ConfigError, match="^grid.ps"):
        cfgmod.loads(SMALL.replace("grid.ps = [1, 2]\n", ""))
    with pytest.raises(ConfigError, match="^grid.ps"):
        cfgmod.loads(SMALL + 'identify.method = "discrete"\n')
    with pytest.raises(ConfigError, match="^grid.taus"):
        cfgmod.loads(SMALL.replace("grid.taus = [15.0, 20.0]\n", ""))
    with pytest.raises(ConfigError, match="^sim.dt"):
        cfgmod.loads(SMALL.replace("sim.dt = 0.1", "sim.dt = 0"))
    with pytest.raises(ConfigError):
        cfgmod.loads("model = \n")


def test_overrides_and_seed():
    cfg = cfgmod.loads(SMALL, "small")
    o = cfg.with_overrides({"stridge.threshold": 0.2, "identify.alpha": 2.0})
    assert o.identify.stridge.threshold == 0.2 and o.identify.alpha == 2.0
    s = cfgmod.with_seed(cfgmod.loads(SMALL + "noise.seed = 9\n"), 11)
    assert s.seed == 11 and s.noise.seed == 11


BUNDLED = {
    "table2": 1274, "table3": 26, "table4": 112, "table6": 101, "table6_noise0": 101,
    "fig5_tau15": 144, "fig5_tau20": 144, "figS1_p2": 90, "figS1_p10": 90, "figS2": 101,
}


@pytest.mark.parametrize("name", sorted(BUNDLED) + ["fig4"])
def test_bundled_configs_load(name):
    cfg = cfgmod.bundled(name)
    if name == "fig4":
        assert cfg.experiment == "robustness"
        assert cfg.robustness["dts"] == (1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 15.0, 20.0)
        assert len(cfg.robustness["etas"]) == 11
    else:
        assert len(cfg.grid) == BUNDLED[name]


def test_unknown_bundled():
    with pytest.raises(ConfigError, match="no bundled config"):
        cfgmod.bundled("table99")
