import math
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from levcool.config import ConfigError, dump_config, load_config, parse_config
from levcool.units import UnitError, format_quantity, parse_quantity

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.ini"))


def test_units_convert_to_si():
    assert parse_quantity("100 um", "length") == pytest.approx(1e-4)
    assert parse_quantity("23 ug", "mass") == pytest.approx(23e-9)
    assert parse_quantity("410 mK", "temperature") == pytest.approx(0.41)
    assert parse_quantity("42.4 Hz", "angular_frequency") == pytest.approx(2 * math.pi * 42.4)
    assert parse_quantity("2.1e-11 m/rtHz", "displacement_psd") == pytest.approx(2.1e-11**2)
    assert parse_quantity("0.6 uPhi0/rtHz", "flux_psd") == pytest.approx(0.36e-12)
    assert parse_quantity("3e-7 rad/rtHz", "displacement_psd", with_dimension=True)[1] == "angle_psd"


@pytest.mark.parametrize("text,kind", [("100", "length"), ("100 kg", "length"), ("abc m", "length"), ("1 m/rtHz", "force_psd")])
def test_units_rejected(text, kind):
    with pytest.raises(UnitError):
        parse_quantity(text, kind)


@given(v=st.floats(-1e30, 1e30, allow_nan=False), dim=st.sampled_from(["length", "mass", "temperature", "force_psd", "angle_psd"]))
def test_format_parse_round_trip(v, dim):
    assert parse_quantity(format_quantity(v, dim), dim) == v


@pytest.mark.parametrize("path", CONFIGS, ids=[p.name for p in CONFIGS])
def test_shipped_configs_round_trip(path):
    cfg = load_config(path)
    assert parse_config(dump_config(cfg)) == cfg


MINIMAL = """
[mode.z]
frequency = {f}
mass = {m}
quality_factor = {q}
bath_temperature = {t}

[noise]
seed = {seed}

[simulation]
duration = 10 s
"""


@given(
    f=st.floats(0.1, 1e5), m=st.floats(1e-15, 1.0), q=st.floats(1.0, 1e9), t=st.floats(0, 1e4),
    seed=st.integers(0, 2**64 - 1),
)
def test_parsed_config_round_trip(f, m, q, t, seed):
    cfg = parse_config(MINIMAL.format(f=f"{f!r} Hz", m=f"{m!r} kg", q=repr(q), t=f"{t!r} K", seed=seed))
    assert cfg.noise.seed == seed
    assert cfg.mode("z").omega0 == pytest.approx(2 * math.pi * f, rel=1e-15)
    assert parse_config(dump_config(cfg)) == cfg


def test_missing_unit_is_a_config_error():
    with pytest.raises(ConfigError, match="missing unit"):
        parse_config(MINIMAL.format(f="42", m="1 kg", q="10", t="1 K", seed=0))


def test_wrong_unit_is_a_config_error():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL.format(f="42 Hz", m="1 m", q="10", t="1 K", seed=0))


def test_missing_section_reported():
    cfg = parse_config(MINIMAL.format(f="42 Hz", m="1 kg", q="10", t="1 K", seed=0))
    with pytest.raises(ConfigError):
        cfg.require("coil")
    with pytest.raises(ConfigError):
        cfg.mode("beta")


def test_analytic_frequency_and_magnet_inertia():
    cfg = load_config(CONFIGS[0].parent / "z_thermal.ini")
    text = (CONFIGS[0].parent / "z_thermal.ini").read_text().replace("frequency = 39.7 Hz", "frequency = analytic")
    cfg2 = parse_config(text)
    assert cfg2.mode("z").omega0 / (2 * math.pi) == pytest.approx(39.7, rel=0.01)
    assert cfg.mode("z").inertia == pytest.approx(23e-9)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config("/nonexistent/config.ini")
