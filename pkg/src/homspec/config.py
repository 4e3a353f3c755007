"""Declarative experiment configuration.

Flat ``key = value`` text files with unit suffixes ("temperature = 188 C",
"t_exp = 11 us").  Unknown keys are rejected with the offending line number,
as are duplicates and malformed values.  write-config emits the effective
settings in canonical SI units; parsing that output reproduces the exact
same configuration (repr round trip).

Defaults are the published three-temperature setup: a 5 cm cell, a 10 nm
filter centered at 796.7 nm, an 80 MHz source integrated for 11 us per
frame (880 repetitions), and a 140-bin spectrometer axis spanning
790-803 nm.
"""

from dataclasses import dataclass, fields, replace

from .constants import RB87
from .detector import DetectionParams
from .errors import ConfigError
from .retrieval import FitConfig
from .spectra import JointSpectralAmplitude, WavelengthGrid, gaussian_jsa
from .vapor import DispersionModel, VaporCell, doppler_lifetime, optical_depth

_LENGTH_UNITS = {"nm": 1e-9, "um": 1e-6, "µm": 1e-6, "mm": 1e-3, "cm": 1e-2, "m": 1.0}
_TIME_UNITS = {"fs": 1e-15, "ps": 1e-12, "ns": 1e-9, "us": 1e-6, "µs": 1e-6, "ms": 1e-3, "s": 1.0}
_FREQUENCY_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}

CELSIUS_OFFSET = 273.15


@dataclass(frozen=True)
class ExperimentConfig:
    """Effective settings of one simulated experiment, all SI internally."""

    temperature_k: float = 188.0 + CELSIUS_OFFSET
    cell_length_m: float = 0.05
    od_override: float | None = None
    filter_center_m: float = 796.7e-9
    jsa_fwhm_m: float = 10e-9
    jsa_correlation: float = -0.9
    grid_start_m: float = 790e-9
    grid_stop_m: float = 803e-9
    grid_bins: int = 140
    visibility: float = 1.0
    kernel_width: int = 1
    chi: float = 4.5455e-4
    eta: float = 0.25
    f_rep_hz: float = 80e6
    t_exp_s: float = 11e-6
    dark_rate: float = 0.0
    seed: int = 12345
    fit_init_od: float = 100.0
    fit_init_visibility: float = 0.9
    fit_od_min: float = 0.0
    fit_od_max: float = 1e6
    fit_visibility_min: float = 0.0
    fit_visibility_max: float = 1.0
    fit_delay: bool = True
    fit_delay_min_s: float = -100e-15
    fit_delay_max_s: float = 100e-15
    fit_max_iterations: int = 400
    fit_tol: float = 1e-12
    mask_radius: int = 2

    def grid(self) -> WavelengthGrid:
        return WavelengthGrid.from_edges(self.grid_start_m, self.grid_stop_m, self.grid_bins)

    def vapor_cell(self) -> VaporCell:
        return VaporCell(temperature=self.temperature_k, length=self.cell_length_m)

    def dispersion_model(self) -> DispersionModel:
        od = self.od_override
        if od is None:
            od = optical_depth(self.vapor_cell())
        return DispersionModel(
            od=od,
            tau=doppler_lifetime(self.temperature_k),
            lambda0=RB87.d1_wavelength,
        )

    def jsa(self) -> JointSpectralAmplitude:
        return gaussian_jsa(
            center=self.filter_center_m,
            marginal_fwhm=self.jsa_fwhm_m,
            correlation=self.jsa_correlation,
            grid_s=self.grid(),
        )

    def detection_params(self) -> DetectionParams:
        return DetectionParams(
            chi=self.chi,
            eta=self.eta,
            f_rep=self.f_rep_hz,
            t_exp=self.t_exp_s,
            dark_rate=self.dark_rate,
            seed=self.seed,
        )

    def fit_config(self) -> FitConfig:
        return FitConfig(
            tau=doppler_lifetime(self.temperature_k),
            lambda0=RB87.d1_wavelength,
            init_od=self.fit_init_od,
            init_visibility=self.fit_init_visibility,
            od_bounds=(self.fit_od_min, self.fit_od_max),
            visibility_bounds=(self.fit_visibility_min, self.fit_visibility_max),
            delay_bounds_fs=(self.fit_delay_min_s / 1e-15, self.fit_delay_max_s / 1e-15),
            fit_delay=self.fit_delay,
            max_iterations=self.fit_max_iterations,
            tol=self.fit_tol,
            mask_radius=self.mask_radius,
            kernel_width=self.kernel_width,
        )


def _parse_unit_value(raw: str, units: dict[str, float], what: str, where: str) -> float:
    parts = raw.split()
    try:
        if len(parts) == 1:
            return float(parts[0])
        if len(parts) == 2 and parts[1] in units:
            return float(parts[0]) * units[parts[1]]
    except ValueError:
        pass
    known = "/".join(units)
    raise ConfigError(f"{where}: expected {what} as '<number> [{known}]', got {raw!r}")


def _parse_temperature(raw: str, where: str) -> float:
    parts = raw.split()
    try:
        if len(parts) == 2 and parts[1] == "C":
            return float(parts[0]) + CELSIUS_OFFSET
        if len(parts) == 2 and parts[1] == "K":
            return float(parts[0])
        if len(parts) == 1:
            return float(parts[0])  # bare value reads as kelvin
    except ValueError:
        pass
    raise ConfigError(f"{where}: expected temperature as '<number> C|K', got {raw!r}")


def _parse_float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {raw!r}") from None


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {raw!r}") from None


def _parse_bool(raw: str, where: str) -> bool:
    if raw in ("true", "yes", "on", "1"):
        return True
    if raw in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{where}: expected true/false, got {raw!r}")


def _parse_od(raw: str, where: str):
    if raw == "auto":
        return None
    return _parse_float(raw, where)


_PARSERS = {
    "temperature": ("temperature_k", _parse_temperature),
    "cell_length": ("cell_length_m", lambda r, w: _parse_unit_value(r, _LENGTH_UNITS, "a length", w)),
    "od": ("od_override", _parse_od),
    "filter_center": ("filter_center_m", lambda r, w: _parse_unit_value(r, _LENGTH_UNITS, "a length", w)),
    "jsa_fwhm": ("jsa_fwhm_m", lambda r, w: _parse_unit_value(r, _LENGTH_UNITS, "a length", w)),
    "jsa_correlation": ("jsa_correlation", _parse_float),
    "grid_start": ("grid_start_m", lambda r, w: _parse_unit_value(r, _LENGTH_UNITS, "a length", w)),
    "grid_stop": ("grid_stop_m", lambda r, w: _parse_unit_value(r, _LENGTH_UNITS, "a length", w)),
    "grid_bins": ("grid_bins", _parse_int),
    "visibility": ("visibility", _parse_float),
    "kernel_width": ("kernel_width", _parse_int),
    "chi": ("chi", _parse_float),
    "eta": ("eta", _parse_float),
    "f_rep": ("f_rep_hz", lambda r, w: _parse_unit_value(r, _FREQUENCY_UNITS, "a frequency", w)),
    "t_exp": ("t_exp_s", lambda r, w: _parse_unit_value(r, _TIME_UNITS, "a time", w)),
    "dark_rate": ("dark_rate", _parse_float),
    "seed": ("seed", _parse_int),
    "fit_init_od": ("fit_init_od", _parse_float),
    "fit_init_visibility": ("fit_init_visibility", _parse_float),
    "fit_od_min": ("fit_od_min", _parse_float),
    "fit_od_max": ("fit_od_max", _parse_float),
    "fit_visibility_min": ("fit_visibility_min", _parse_float),
    "fit_visibility_max": ("fit_visibility_max", _parse_float),
    "fit_delay": ("fit_delay", _parse_bool),
    "fit_delay_min": ("fit_delay_min_s", lambda r, w: _parse_unit_value(r, _TIME_UNITS, "a time", w)),
    "fit_delay_max": ("fit_delay_max_s", lambda r, w: _parse_unit_value(r, _TIME_UNITS, "a time", w)),
    "fit_max_iterations": ("fit_max_iterations", _parse_int),
    "fit_tol": ("fit_tol", _parse_float),
    "mask_radius": ("mask_radius", _parse_int),
}

_FIELD_TO_KEY = {field: key for key, (field, _) in _PARSERS.items()}


def parse_config(text: str, base: ExperimentConfig | None = None, source: str = "config") -> ExperimentConfig:
    """Parse config text on top of ``base`` (or the defaults)."""
    updates = {}
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if "=" not in stripped:
            raise ConfigError(f"{where}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _PARSERS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r} (first on line {seen[key]})")
        seen[key] = lineno
        field_name, parser = _PARSERS[key]
        updates[field_name] = parser(raw, where)
    return replace(base if base is not None else ExperimentConfig(), **updates)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def apply_overrides(config: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply repeatable --override key=value settings on top of a config."""
    out = config
    for n, item in enumerate(overrides, start=1):
        out = parse_config(item, base=out, source=f"override {n}")
    return out


def format_config(config: ExperimentConfig) -> str:
    """Serialize the effective settings in canonical SI units.

    The output parses back to the identical configuration: floats are
    written with repr, temperatures in K, lengths in m, times in s.
    """
    lines = ["# effective settings, canonical SI units"]
    for f in fields(ExperimentConfig):
        key = _FIELD_TO_KEY[f.name]
        value = getattr(config, f.name)
        if f.name == "temperature_k":
            rendered = f"{value!r} K"
        elif f.name.endswith("_m"):
            rendered = f"{value!r} m"
        elif f.name.endswith("_s"):
            rendered = f"{value!r} s"
        elif f.name.endswith("_hz"):
            rendered = f"{value!r} Hz"
        elif f.name == "od_override":
            rendered = "auto" if value is None else repr(value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = repr(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
