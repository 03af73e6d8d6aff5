"""Run configuration for co-segmentation."""

import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ValidationError

VERBOSITY_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

# JSON key -> (field name, default); "shapes" and "n_parts" are required
_OPTIONAL_KEYS: dict[str, tuple[str, object]] = {
    "L": ("n_labels", None),
    "k_basis": ("k_basis", 50),
    "k_eigs": ("k_eigs", 300),
    "k_embed": ("k_embed", 10),
    "n_times": ("n_times", 100),
    "h_factor": ("h_factor", 2.0),
    "truncation_epsilon": ("truncation_epsilon", 1e-9),
    "ridge": ("ridge", None),
    "commutativity": ("commutativity", 0.0),
    "hks_normalize": ("hks_normalize", True),
    "split_components": ("split_components", False),
    "seed": ("seed", 0),
    "output_dir": ("output_dir", "coseg-out"),
    "cache_dir": ("cache_dir", None),
    "verbosity": ("verbosity", "INFO"),
    "workers": ("workers", 1),
    "truth": ("truth", None),
}
_REQUIRED_KEYS = ("shapes", "n_parts")
_INT_KEYS = {"n_parts", "L", "k_basis", "k_eigs", "k_embed", "n_times", "seed", "workers"}
_FLOAT_KEYS = {"h_factor", "truncation_epsilon", "ridge", "commutativity"}
_BOOL_KEYS = {"hks_normalize", "split_components"}
_NULLABLE_KEYS = {"L", "ridge", "cache_dir", "truth", "truncation_epsilon"}

# Fields that cannot change the numerical result
_RUNTIME_FIELDS = {"output_dir", "cache_dir", "verbosity", "workers"}


@dataclass(frozen=True)
class RunConfig:
    """Fully defaulted run parameters. Paths are absolute."""

    shapes: tuple[Path, ...]
    n_parts: int
    n_labels: int
    k_basis: int = 50
    k_eigs: int = 300
    k_embed: int = 10
    n_times: int = 100
    h_factor: float = 2.0
    truncation_epsilon: float | None = 1e-9
    ridge: float | None = None
    commutativity: float = 0.0
    hks_normalize: bool = True
    split_components: bool = False
    seed: int = 0
    output_dir: Path = Path("coseg-out")
    cache_dir: Path | None = None
    verbosity: str = "INFO"
    workers: int = 1
    truth: tuple[Path, ...] | None = None

    @classmethod
    def from_file(cls, config_path: Path) -> "RunConfig":
        """Load a JSON run config. Relative paths resolve against its directory.

        Raises ValidationError if the file is missing, unparsable or has bad keys.
        """
        config_path = Path(config_path)
        if not config_path.exists():
            raise ValidationError(f"Config file not found: {config_path}")
        if not config_path.is_file():
            raise ValidationError(f"Config path is not a file: {config_path}")

        try:
            data = json.loads(config_path.read_text())
        except json.JSONDecodeError as e:
            raise ValidationError(f"Invalid JSON in {config_path}: {e}") from e

        return cls.from_dict(data, config_path.resolve().parent)

    @classmethod
    def from_dict(cls, data: object, base_dir: Path) -> "RunConfig":
        if not isinstance(data, dict):
            raise ValidationError("Config must be a JSON object")

        errors: list[str] = []
        unknown = sorted(set(data) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS))
        if unknown:
            errors.append(f"Unknown config keys: {', '.join(unknown)}")
        missing = [key for key in _REQUIRED_KEYS if key not in data]
        if missing:
            errors.append(f"Missing required keys: {', '.join(missing)}")
        errors += _type_errors(data)
        if errors:
            raise ValidationError.from_errors(errors)

        values: dict[str, object] = {}
        for key, (name, default) in _OPTIONAL_KEYS.items():
            values[name] = data.get(key, default)

        n_parts = data["n_parts"]
        if values["n_labels"] is None:
            values["n_labels"] = n_parts
        values["output_dir"] = _resolve(base_dir, values["output_dir"])
        if values["cache_dir"] is not None:
            values["cache_dir"] = _resolve(base_dir, values["cache_dir"])
        if values["truth"] is not None:
            values["truth"] = tuple(_resolve(base_dir, p) for p in values["truth"])
        for key in ("h_factor", "commutativity", "truncation_epsilon", "ridge"):
            if values[key] is not None:
                values[key] = float(values[key])
        values["verbosity"] = str(values["verbosity"]).upper()

        return cls(
            shapes=tuple(_resolve(base_dir, p) for p in data["shapes"]),
            n_parts=n_parts,
            **values,
        )

    def validate(self) -> list[str]:
        """Range checks and path existence; returns the list of problems."""
        errors: list[str] = []

        if len(self.shapes) < 2:
            errors.append(f"At least 2 shapes are required, got {len(self.shapes)}")
        for path in self.shapes:
            if not path.is_file():
                errors.append(f"Shape file does not exist: {path}")
        if self.truth is not None:
            if len(self.truth) != len(self.shapes):
                errors.append(f"truth has {len(self.truth)} entries for {len(self.shapes)} shapes")
            for path in self.truth:
                if not path.is_file():
                    errors.append(f"Ground-truth file does not exist: {path}")

        if self.n_parts < 1:
            errors.append(f"n_parts must be >= 1, got {self.n_parts}")
        if self.n_labels < 1:
            errors.append(f"L must be >= 1, got {self.n_labels}")
        if self.k_basis < 2:
            errors.append(f"k_basis must be >= 2, got {self.k_basis}")
        if self.k_eigs < self.k_basis:
            errors.append(f"k_eigs ({self.k_eigs}) must be >= k_basis ({self.k_basis})")
        if self.k_embed < 1:
            errors.append(f"k_embed must be >= 1, got {self.k_embed}")
        if self.n_times < 2:
            errors.append(f"n_times must be >= 2, got {self.n_times}")
        if self.h_factor <= 0:
            errors.append(f"h_factor must be > 0, got {self.h_factor}")
        if self.truncation_epsilon is not None and not (0 < self.truncation_epsilon < 1):
            errors.append(f"truncation_epsilon must be in (0, 1), got {self.truncation_epsilon}")
        if self.ridge is not None and self.ridge < 0:
            errors.append(f"ridge must be >= 0, got {self.ridge}")
        if self.commutativity < 0:
            errors.append(f"commutativity must be >= 0, got {self.commutativity}")
        if self.workers < 1:
            errors.append(f"workers must be >= 1, got {self.workers}")
        if self.verbosity not in VERBOSITY_LEVELS:
            errors.append(f"verbosity must be one of {', '.join(VERBOSITY_LEVELS)}, got {self.verbosity}")

        return errors

    def to_dict(self) -> dict[str, object]:
        result: dict[str, object] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = [str(v) for v in value]
            result[f.name] = value
        return result

    def content_hash(self) -> str:
        """SHA-256 over the parameters that affect results (not output/cache/logging)."""
        payload = {k: v for k, v in self.to_dict().items() if k not in _RUNTIME_FIELDS}
        payload["shapes"] = [Path(p).name for p in payload["shapes"]]
        if payload["truth"] is not None:
            payload["truth"] = [Path(p).name for p in payload["truth"]]
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def to_log_string(self) -> str:
        ridge = "auto" if self.ridge is None else f"{self.ridge:g}"
        cache = self.cache_dir or "none"
        return (
            f"shapes={len(self.shapes)}, n_parts={self.n_parts}, L={self.n_labels}, "
            f"k_basis={self.k_basis}, k_eigs={self.k_eigs}, k_embed={self.k_embed}, "
            f"n_times={self.n_times}, h_factor={self.h_factor:g}, ridge={ridge}, "
            f"seed={self.seed}, workers={self.workers}, output={self.output_dir}, cache={cache}"
        )


def parse_config(path: Path) -> RunConfig:
    """Load and validate a run config; raises ValidationError listing every problem."""
    config = RunConfig.from_file(path)
    errors = config.validate()
    if errors:
        raise ValidationError.from_errors(errors)
    return config


def _resolve(base_dir: Path, value: object) -> Path:
    path = Path(str(value)).expanduser()
    return path if path.is_absolute() else (base_dir / path).resolve()


def _type_errors(data: dict) -> list[str]:
    errors: list[str] = []
    for key, value in data.items():
        if value is None and key in _NULLABLE_KEYS:
            continue
        if key in _INT_KEYS and (not isinstance(value, int) or isinstance(value, bool)):
            errors.append(f"{key} must be an integer, got {value!r}")
        elif key in _FLOAT_KEYS and (not isinstance(value, (int, float)) or isinstance(value, bool)):
            errors.append(f"{key} must be a number, got {value!r}")
        elif key in _BOOL_KEYS and not isinstance(value, bool):
            errors.append(f"{key} must be true or false, got {value!r}")
        elif key in ("shapes", "truth") and (
            not isinstance(value, list) or not all(isinstance(p, str) for p in value)
        ):
            errors.append(f"{key} must be a list of paths")
        elif key in ("output_dir", "cache_dir", "verbosity") and not isinstance(value, str):
            errors.append(f"{key} must be a string, got {value!r}")
    return errors
