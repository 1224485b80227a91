"""Pipeline configuration: defaults, flat key=value files, content hash.

The file grammar is one ``section.key = value`` assignment per line, with
``#`` comments and blank lines ignored, e.g.::

    grid.num_intervals = 64
    pod.tol = 1e-4
    vkoga.gamma = 1.0

Unknown keys are rejected so typos cannot silently fall back to defaults.
"""

import hashlib
from dataclasses import dataclass, field, fields

from .fom import Parameter, ParameterDomain


@dataclass
class PipelineConfig:
    """All knobs of the full pipeline run.

    The defaults reproduce the reference experiment: unit domain at
    ``h = 2^-6``, end time 3 with ``dt = 2^-13`` (24576 steps), HAPOD
    tolerance ``1e-4`` on the four corner trajectories, 196 random training
    parameters for the surrogate, error test sets of 5 (ROM) and 50 (ML)
    fresh points, and timing averages over 10 (ROM) and 1000 (ML) inputs.
    """

    grid_num_intervals: int = 64
    time_t_end: float = 3.0
    time_num_steps: int = 24576
    domain_da_min: float = 1e-3
    domain_da_max: float = 1.0
    domain_pe_min: float = 1e-3
    domain_pe_max: float = 1.0
    pod_tol: float = 1e-4
    pod_omega: float = 0.75
    pod_chunk_size: int = 1024
    vkoga_gamma: float = 1.0
    vkoga_lambda_reg: float = 0.0
    vkoga_max_points: int = 100
    vkoga_greedy_tol: float | None = None
    sampling_seed: int = 0
    sampling_n_rom_train: int = 196
    sampling_n_rom_err_test: int = 5
    sampling_n_ml_err_test: int = 50
    sampling_n_rom_timing: int = 10
    sampling_n_ml_timing: int = 1000
    output_dir: str = "out"

    def domain(self):
        return ParameterDomain(Parameter(self.domain_da_min, self.domain_pe_min),
                               Parameter(self.domain_da_max, self.domain_pe_max))

    def validate(self):
        if self.grid_num_intervals < 2:
            raise ValueError("grid.num_intervals must be >= 2")
        if self.time_num_steps < 1:
            raise ValueError("time.num_steps must be >= 1")
        if self.time_t_end <= 0:
            raise ValueError("time.t_end must be positive")
        if not 0.0 < self.pod_omega < 1.0:
            raise ValueError("pod.omega must lie in (0, 1)")
        if self.pod_tol <= 0.0:
            raise ValueError("pod.tol must be positive")
        if self.pod_chunk_size < 1:
            raise ValueError("pod.chunk_size must be >= 1")
        for name in ("sampling_n_rom_train", "sampling_n_rom_err_test",
                     "sampling_n_ml_err_test"):
            if getattr(self, name) < 0:
                raise ValueError(f"{_to_key(name)} must be >= 0")
        if self.sampling_n_rom_timing < 1 or self.sampling_n_ml_timing < 1:
            raise ValueError("timing sample counts must be >= 1")
        self.domain()  # bound-order check
        return self


def _to_key(attr):
    section, _, rest = attr.partition("_")
    return f"{section}.{rest}"


def _to_attr(key):
    return key.replace(".", "_", 1)


_FIELDS = {f.name: f for f in fields(PipelineConfig)}
_INT_FIELDS = {"grid_num_intervals", "time_num_steps", "pod_chunk_size",
               "vkoga_max_points", "sampling_seed", "sampling_n_rom_train",
               "sampling_n_rom_err_test", "sampling_n_ml_err_test",
               "sampling_n_rom_timing", "sampling_n_ml_timing"}
_STR_FIELDS = {"output_dir"}


def _parse_value(attr, text):
    if text.lower() == "none":
        return None
    if attr in _INT_FIELDS:
        return int(text)
    if attr in _STR_FIELDS:
        return text
    return float(text)


def parse_config(text):
    """Parse the flat key=value grammar into a validated config."""
    cfg = PipelineConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        attr = _to_attr(key)
        if attr not in _FIELDS:
            raise ValueError(f"line {lineno}: unknown key '{key}'")
        try:
            setattr(cfg, attr, _parse_value(attr, value))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for '{key}': {exc}")
    return cfg.validate()


def load_config(path):
    with open(path) as f:
        return parse_config(f.read())


def format_config(cfg):
    """Canonical serialization (field order, repr-exact floats)."""
    lines = []
    for f in fields(PipelineConfig):
        value = getattr(cfg, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, float):
            text = f"{value:.17g}"
        else:
            text = str(value)
        lines.append(f"{_to_key(f.name)} = {text}")
    return "\n".join(lines) + "\n"


def save_config(path, cfg):
    with open(path, "w") as f:
        f.write(format_config(cfg))


def config_hash(cfg):
    """Short content hash used in artifact filenames."""
    return hashlib.sha256(format_config(cfg).encode()).hexdigest()[:12]
