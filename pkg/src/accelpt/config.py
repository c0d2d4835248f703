"""Run configuration: sectioned ``key = value`` files and named presets.

Example::

    [target]
    name = gmm
    dim = 10

    [path]
    kind = linear
    N = 30

    [accelerator]
    kind = identity
    K = 0

    [explorer]
    step_size = 0.03
    leapfrog_steps = 5

    [run]
    T = 100000
    seed = 0
    tune_rounds = 10
"""
import configparser
import copy
from dataclasses import asdict, dataclass, field, fields

from .accelerators import ACCELERATOR_KINDS
from .annealing import PATH_KINDS, Schedule
from .errors import ConfigError
from .targets import TARGET_NAMES

# (section, key) -> RunConfig attribute
_KEYS = {
    ("target", "name"): "target",
    ("target", "dim"): "dim",
    ("target", "seed"): "target_seed",
    ("path", "kind"): "path",
    ("path", "n"): "N",
    ("path", "schedule"): "schedule",
    ("path", "schedule_file"): "schedule_file",
    ("accelerator", "kind"): "accelerator",
    ("accelerator", "k"): "K",
    ("accelerator", "sigma"): "sigma",
    ("accelerator", "flow_file"): "flow_file",
    ("accelerator", "verify"): "verify_work",
    ("explorer", "step_size"): "step_size",
    ("explorer", "leapfrog_steps"): "leapfrog_steps",
    ("explorer", "steps_per_iteration"): "steps_per_iteration",
    ("run", "t"): "T",
    ("run", "seed"): "seed",
    ("run", "burn_in"): "burn_in",
    ("run", "thin"): "thin",
    ("run", "store_samples"): "store_samples",
    ("run", "tune_rounds"): "tune_rounds",
    ("run", "pilot_t"): "pilot_T",
    ("run", "pilot_burn"): "pilot_burn",
    ("run", "resamples"): "resamples",
    ("run", "resample_size"): "resample_size",
    ("run", "out"): "out",
    ("run", "sweep_dims"): "sweep_dims",
    ("run", "sweep_k"): "sweep_K",
}


@dataclass
class RunConfig:
    target: str = "gaussian"
    dim: int = None
    target_seed: int = 0
    target_params: dict = field(default_factory=dict)
    path: str = "linear"
    N: int = 1
    schedule: tuple = None
    schedule_file: str = None
    accelerator: str = "identity"
    K: int = 0
    sigma: tuple = (1.0,)
    flow_file: str = None
    verify_work: bool = False
    step_size: float = 0.03
    leapfrog_steps: int = 5
    steps_per_iteration: int = 1
    T: int = 1000
    seed: int = 0
    burn_in: int = None
    thin: int = 10
    store_samples: bool = True
    tune_rounds: int = 0
    pilot_T: int = 600
    pilot_burn: int = 100
    resamples: int = 30
    resample_size: int = 1000
    out: str = "out"
    sweep_dims: tuple = (2, 10, 50, 100)
    sweep_K: tuple = (0, 1, 2, 5)

    def validate(self):
        if self.target not in TARGET_NAMES:
            raise ConfigError("target.name", f"unknown target {self.target!r}")
        if self.dim is None:
            defaults = {"gaussian": 1, "manywell": 32, "dw4": 8}
            if self.target not in defaults:
                raise ConfigError("target.dim", f"{self.target} requires dim")
            self.dim = defaults[self.target]
        if self.path not in PATH_KINDS:
            raise ConfigError("path.kind", f"unknown path {self.path!r}")
        if self.accelerator not in ACCELERATOR_KINDS:
            raise ConfigError("accelerator.kind", f"unknown accelerator {self.accelerator!r}")
        if int(self.N) < 1:
            raise ConfigError("path.N", "must be >= 1")
        if (self.accelerator == "identity") != (int(self.K) == 0):
            raise ConfigError("accelerator.K", "K = 0 exactly when the accelerator is identity")
        if self.accelerator == "affine_flow" and int(self.K) != 1:
            raise ConfigError("accelerator.K", "affine_flow uses K = 1")
        if self.accelerator == "analytic_diffusion" and self.path != "analytic_vp":
            raise ConfigError("accelerator.kind", "analytic_diffusion requires path.kind = analytic_vp")
        if self.path == "analytic_vp" and self.target not in ("gmm", "gaussian"):
            raise ConfigError("path.kind", "analytic_vp requires a gmm or gaussian target")
        if any(s <= 0 for s in self.sigma):
            raise ConfigError("accelerator.sigma", "must be positive")
        if self.step_size <= 0:
            raise ConfigError("explorer.step_size", "must be positive")
        if self.leapfrog_steps < 1:
            raise ConfigError("explorer.leapfrog_steps", "must be >= 1")
        if self.steps_per_iteration < 0:
            raise ConfigError("explorer.steps_per_iteration", "must be >= 0")
        if self.T < 0:
            raise ConfigError("run.T", "must be >= 0")
        if self.thin < 1:
            raise ConfigError("run.thin", "must be >= 1")
        if self.burn_in is not None and not 0 <= self.burn_in <= max(self.T, 0):
            raise ConfigError("run.burn_in", "must lie in [0, T]")
        if self.schedule is not None:
            try:
                s = Schedule(tuple(self.schedule))
            except ConfigError as e:
                raise ConfigError("path.schedule", str(e)) from None
            if s.N != self.N:
                raise ConfigError("path.schedule", f"has {s.N} pairs but N = {self.N}")
        return self

    @property
    def effective_burn_in(self):
        return int(0.1 * self.T) if self.burn_in is None else int(self.burn_in)

    def to_dict(self):
        d = asdict(self)
        d["burn_in_effective"] = self.effective_burn_in
        return d


def _convert(attr, raw, where):
    types = {f.name: f.type for f in fields(RunConfig)}
    kind = types[attr]
    text = raw.strip()
    try:
        if attr in ("schedule", "sigma"):
            return tuple(float(v) for v in text.replace("\n", ",").split(",") if v.strip())
        if attr in ("sweep_dims", "sweep_K"):
            return tuple(int(v) for v in text.split(",") if v.strip())
        if attr in ("dim", "burn_in") and text.lower() in ("", "none"):
            return None
        if kind is int or attr in ("dim", "burn_in"):
            return int(text)
        if kind is float:
            return float(text)
        if kind is bool:
            low = text.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(text)
            return low in ("1", "true", "yes", "on")
        return text or None
    except ValueError:
        raise ConfigError(where, f"cannot parse {raw!r}") from None


def _number(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_config_text(text, source="<config>"):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        if line is None and getattr(e, "errors", None):
            line = e.errors[0][0]
        where = f"{source}:{line}" if line else source
        raise ConfigError(where, str(e).splitlines()[0]) from None
    values = {}
    params = {}
    for section in cp.sections():
        sec = section.lower()
        if sec not in ("target", "path", "accelerator", "explorer", "run"):
            raise ConfigError(section, "unknown section")
        for key, raw in cp.items(section):
            attr = _KEYS.get((sec, key.lower()))
            if attr is None:
                if sec == "target":
                    params[key] = _number(raw.strip())
                    continue
                raise ConfigError(f"{section}.{key}", "unknown key")
            values[attr] = _convert(attr, raw, f"{section}.{key}")
    if "target" not in values:
        raise ConfigError("target.name", "missing")
    cfg = RunConfig(**values)
    cfg.target_params = params
    return cfg.validate()


def parse_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e.strerror}") from None
    return parse_config_text(text, source=str(path))


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

PRESETS = {
    # classic PT on GMM-10: fixed HMC(0.03, 5), tuned schedule
    "table1-pt-gmm10-n30": dict(target="gmm", dim=10, path="linear", N=30, accelerator="identity",
                                K=0, step_size=0.03, leapfrog_steps=5, T=100000, tune_rounds=10,
                                thin=100),
    "table1-pt-gmm10-n6": dict(target="gmm", dim=10, path="linear", N=6, accelerator="identity",
                               K=0, step_size=0.03, leapfrog_steps=5, T=100000, tune_rounds=10,
                               thin=100),
    # diffusion APT against dimension; sweep over d and K
    "fig2-diffusion-sweep": dict(target="gmm", dim=2, path="analytic_vp", N=30,
                                 accelerator="identity", K=0, step_size=0.03, leapfrog_steps=5,
                                 T=20000, thin=100, sweep_dims=(2, 10, 50, 100), sweep_K=(0, 1, 2, 5)),
    # free-energy runs
    "fig3-mw32-pt": dict(target="manywell", dim=32, path="linear", N=30, accelerator="identity",
                         K=0, step_size=0.22, leapfrog_steps=5, T=100000, tune_rounds=10,
                         thin=1000, store_samples=False),
    "fig3-dw4-pt60": dict(target="dw4", dim=8, path="linear", N=60, accelerator="identity", K=0,
                          step_size=0.22, leapfrog_steps=5, T=100000, tune_rounds=10,
                          thin=1000, store_samples=False),
    "fig3-dw4-pt30": dict(target="dw4", dim=8, path="linear", N=30, accelerator="identity", K=0,
                          step_size=0.22, leapfrog_steps=5, T=100000, tune_rounds=10,
                          thin=1000, store_samples=False),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    values = copy.deepcopy(PRESETS[name])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values).validate()
