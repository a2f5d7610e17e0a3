import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphflow.config import ConfigError, MonitorConfig, OutputConfig, parse_config, serialize_config
from graphflow.domain import DomainSpec
from graphflow.flow import StepConfig

MINIMAL = """\
[domain]
kind = box
lower = 0, 0
upper = 1, 1
h = 0.1

[scenario]
name = affine
A = 0.5, 0

[stepping]
scheme = explicit

[monitors]
seed = 7

[output]
directory = out
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.domain == DomainSpec.box((0, 0), (1, 1), 0.1)
    assert cfg.scenario == "affine" and cfg.scenario_params == {"A": [(0.5, 0.0)]}
    assert cfg.stepping == StepConfig(scheme="explicit")
    assert cfg.monitors == MonitorConfig(seed=7)
    assert cfg.output == OutputConfig(directory="out")
    sc = cfg.make_scenario()
    assert (sc.m, sc.n) == (1, 2)


def test_bad_scheme_names_line():
    text = MINIMAL.replace("scheme = explicit", "scheme = magic")
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == 12
    assert "line 12" in str(err.value) and "magic" in str(err.value)


@pytest.mark.parametrize(
    "edit,line",
    [
        (("h = 0.1", "h = 0.1\nh = 0.2"), 6),
        (("[output]", "[outputs]"), 17),
        (("seed = 7", "seed = 7\nsede = 3"), 16),
        (("h = 0.1", "h = fast"), 5),
        (("A = 0.5, 0", "A = 0.5, 0\nR = 1"), 10),
        (("directory = out", "directory = out\nplot = colour"), 17),
        (("kind = box", "kind = box\nradius = 2"), 3),
        (("[stepping]", "dangling line\n[stepping]"), 11),
        (("scheme = explicit", "dt = -1"), 11),
    ],
)
def test_errors_carry_line_numbers(edit, line):
    with pytest.raises(ConfigError) as err:
        parse_config(MINIMAL.replace(*edit))
    assert err.value.line == line


def test_seed_required():
    with pytest.raises(ConfigError, match="seed"):
        parse_config(MINIMAL.replace("seed = 7", "strict = true"))


def test_missing_section():
    with pytest.raises(ConfigError, match=r"\[output\]"):
        parse_config(MINIMAL.split("[output]")[0])


def test_ball_config_and_comments():
    text = """# admissible Hopf data
[domain]
kind = ball   # unit ball
n = 4
h = 0.125
[scenario]
name = hopf_quadratic
R = 0.0068
[stepping]
dt = auto
t_end = 0.05
steady_tol = none
workers = 2
[monitors]
seed = 0
strict = yes
[output]
directory = runs/hopf
snapshot_every = 50
plot = max_lambda
"""
    cfg = parse_config(text)
    assert cfg.domain == DomainSpec.ball(4, 0.125)
    assert cfg.stepping.steady_tol is None and cfg.stepping.workers == 2
    assert cfg.monitors.strict and cfg.output.plot == "max_lambda"


def test_scenario_domain_mismatch():
    text = MINIMAL.replace("name = affine\nA = 0.5, 0", "name = hopf_quadratic\nR = 0.1")
    with pytest.raises(ConfigError, match="n = 4"):
        parse_config(text)


finite = st.floats(-10, 10, allow_nan=False).map(lambda v: float(np.float64(v)))


@st.composite
def configs(draw):
    if draw(st.booleans()):
        lo = draw(st.tuples(finite, finite))
        size = draw(st.floats(0.5, 4))
        h = size / draw(st.integers(2, 12))
        dom = f"kind = box\nlower = {lo[0]!r}, {lo[1]!r}\nupper = {lo[0] + size!r}, {lo[1] + size!r}\nh = {h!r}"
        n = 2
    else:
        n = draw(st.integers(2, 4))
        dom = f"kind = ball\nn = {n}\nh = {draw(st.floats(0.1, 0.5))!r}\nradius = {draw(st.floats(0.5, 2))!r}"
    m = draw(st.integers(1, 3))
    rows = [[draw(finite) for _ in range(n)] for _ in range(m)]
    A = "; ".join(", ".join(repr(v) for v in r) for r in rows)
    scheme = draw(st.sampled_from(["explicit", "semi_implicit"]))
    dt = draw(st.one_of(st.just("auto"), st.floats(1e-6, 1.0).map(repr)))
    return f"""[domain]
{dom}
[scenario]
name = affine
A = {A}
[stepping]
scheme = {scheme}
dt = {dt}
safety = {draw(st.floats(0.01, 0.99))!r}
picard_iters = {draw(st.integers(1, 5))}
t_end = {draw(st.floats(1e-3, 10))!r}
[monitors]
seed = {draw(st.integers(0, 2**31))}
cadence = {draw(st.integers(1, 100))}
mp_eps = {draw(st.sampled_from(["none", "1e-9"]))}
[output]
directory = {draw(st.sampled_from(["out", "a/b", "run 1"]))}
plot = {draw(st.sampled_from(["area", "xi", f"f_max_{m}"]))}
"""


@given(configs())
def test_round_trip(text):
    cfg = parse_config(text)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)
