"""Scene description files (TOML).

Positions are meters and angles degrees at the file boundary; the carrier is
given as exactly one of ``wavelength`` (m) or ``frequency_hz``.  Example::

    frequency_hz = 3.5e9

    [tx]
    position = [0.0, 0.53, 0.1]
    [rx]
    position = [4.51, -0.48, 0.1]

    [[panels]]
    center = [1.24, -1.25, 1.56]
    boresight_deg = 90
    rows = 10
    cols = 10
    spacing = 0.014
    k_levels = 4

    [channel]
    tx_power_dbm = 0
    meas_noise_sigma = 0.02
    nlos = false
    blockage = 1e-3
    [channel.attenuation]
    model = "power_law"      # or "constant"
    exponent = 2.0
    direct = 1e5
    tx_panel = 2e3
    panel_rx = 2e3
    [channel.rician]
    direct = 10              # "inf" or inf for pure line of sight
    tx_panel = 10
    panel_rx = 10
"""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import (
    ChannelEnsemble,
    ConstantAttenuation,
    PowerLawAttenuation,
    RicianFactors,
    build_ensemble,
)
from .errors import ConfigurationError
from .geometry import MtsPanel, SceneGeometry

SPEED_OF_LIGHT = 299_792_458.0
BUILTIN_PREFIX = "builtin:"


def dbm_to_linear(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class ChannelSettings:
    attenuation: dict = field(default_factory=lambda: {"model": "constant", "direct": 0.25,
                                                       "tx_panel": 0.005, "panel_rx": 0.005})
    rician: RicianFactors = field(default_factory=RicianFactors.pure_los)
    tx_power_dbm: float = 0.0
    meas_noise_sigma: float = 0.0
    nlos: bool = False
    blockage: float = 1e-3

    def attenuation_model(self):
        cfg = dict(self.attenuation)
        model = cfg.pop("model", "constant")
        if model == "constant":
            try:
                return ConstantAttenuation(cfg["direct"], cfg["tx_panel"], cfg["panel_rx"])
            except KeyError as exc:
                raise ConfigurationError(f"constant attenuation needs {exc.args[0]!r}") from None
        if model == "power_law":
            coeffs = {k: cfg[k] for k in ("direct", "tx_panel", "panel_rx") if k in cfg}
            return PowerLawAttenuation(coeffs, cfg.get("exponent", 2.0), cfg.get("gamma_max"))
        raise ConfigurationError(f"unknown attenuation model {model!r}")


@dataclass(frozen=True)
class Scenario:
    scene: SceneGeometry
    channel: ChannelSettings = field(default_factory=ChannelSettings)

    def ensemble(self) -> ChannelEnsemble:
        ch = self.channel
        return build_ensemble(
            self.scene,
            ch.attenuation_model(),
            ch.rician,
            dbm_to_linear(ch.tx_power_dbm),
            nlos=ch.nlos,
            blockage=ch.blockage,
        )

    def with_channel(self, **changes) -> "Scenario":
        return Scenario(self.scene, dataclasses.replace(self.channel, **changes))

    def with_panels(self, panels) -> "Scenario":
        return Scenario(self.scene.replace_panels(panels), self.channel)


def _rician_value(x) -> float:
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "los", "infinity"):
            return math.inf
        return float(x)
    return float(x)


def parse_scenario(data: dict) -> Scenario:
    has_wl, has_f = "wavelength" in data, "frequency_hz" in data
    if has_wl == has_f:
        raise ConfigurationError("give exactly one of 'wavelength' or 'frequency_hz'")
    wavelength = float(data["wavelength"]) if has_wl else SPEED_OF_LIGHT / float(data["frequency_hz"])
    try:
        tx = data["tx"]["position"]
        rx = data["rx"]["position"]
    except KeyError as exc:
        raise ConfigurationError(f"scene is missing {exc.args[0]!r}") from None
    panels = []
    for i, p in enumerate(data.get("panels", [])):
        panels.append(
            MtsPanel(
                panel_id=int(p.get("id", i)),
                center=p["center"],
                boresight_azimuth=math.radians(float(p.get("boresight_deg", 0.0))),
                n_row=int(p["rows"]),
                n_col=int(p["cols"]),
                atom_spacing=float(p["spacing"]),
                k_levels=int(p["k_levels"]),
            )
        )
    scene = SceneGeometry(tx, rx, tuple(panels), wavelength)

    ch = data.get("channel", {})
    ric = ch.get("rician", {})
    channel = ChannelSettings(
        attenuation=dict(ch.get("attenuation", ChannelSettings().attenuation)),
        rician=RicianFactors(
            _rician_value(ric.get("direct", math.inf)),
            _rician_value(ric.get("tx_panel", math.inf)),
            _rician_value(ric.get("panel_rx", math.inf)),
        ),
        tx_power_dbm=float(ch.get("tx_power_dbm", 0.0)),
        meas_noise_sigma=float(ch.get("meas_noise_sigma", 0.0)),
        nlos=bool(ch.get("nlos", False)),
        blockage=float(ch.get("blockage", 1e-3)),
    )
    return Scenario(scene, channel)


def resolve_scene_path(ref: str | Path, base: Path | None = None):
    """Path of a scene file; ``builtin:<name>`` refers to a scene shipped with the package."""
    ref = str(ref)
    if ref.startswith(BUILTIN_PREFIX):
        name = ref[len(BUILTIN_PREFIX):]
        return resources.files("blindmts").joinpath("scenes", f"{name}.toml")
    path = Path(ref)
    if base is not None and not path.is_absolute():
        path = base / path
    return path


def load_scenario(ref: str | Path, base: Path | None = None) -> Scenario:
    path = resolve_scene_path(ref, base)
    with path.open("rb") as fh:
        return parse_scenario(tomllib.load(fh))


def builtin_scenes() -> list[str]:
    root = resources.files("blindmts").joinpath("scenes")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))
