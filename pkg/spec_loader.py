"""
Loaders for family specs, strategy specs and symbol files

Specs are JSON documents parsed with orjson and validated by the pydantic
models of model_families and mixtures. Symbol files come in three formats:

- bits: raw bytes, each byte read as eight binary symbols, most
  significant bit first
- digits: text with one symbol per character (0-9); whitespace is ignored
- tokens: whitespace- or comma-separated numbers, for alphabets with
  negative or multi-digit symbols
"""
import logging
import re
from pathlib import Path
from typing import Any, List, Literal, Union

import numpy as np
import orjson
from pydantic import ValidationError

from exceptions import ConfigurationError, DomainError
from mixtures import StrategySpec
from model_families import FamilySpec, ModelFamily

logger = logging.getLogger(__name__)

SymbolFormat = Literal["bits", "digits", "tokens"]

SUPPORTED_FORMATS = ("bits", "digits", "tokens")


def load_json(path: Union[str, Path]) -> Any:
    """Parse a JSON file, raising ConfigurationError that names the file"""
    path = Path(path)
    try:
        return orjson.loads(path.read_bytes())
    except FileNotFoundError:
        logger.error(f"Config file not found: {path}")
        raise ConfigurationError(f"{path}: file not found")
    except orjson.JSONDecodeError as e:
        logger.error(f"Invalid JSON in {path}: {e}")
        raise ConfigurationError(f"{path}: invalid JSON ({e})")


def _validate(model, payload: Any, path: Path):
    try:
        return model.model_validate(payload)
    except ValidationError as e:
        logger.error(f"Validation failed for {path}: {e.error_count()} error(s)")
        raise ConfigurationError(f"{path}: {e}")


def load_family_spec(path: Union[str, Path]) -> Union[FamilySpec, str]:
    """A family spec document, or a JSON string naming a preset"""
    path = Path(path)
    payload = load_json(path)
    if isinstance(payload, str):
        return payload
    return _validate(FamilySpec, payload, path)


def load_strategy_spec(path: Union[str, Path]) -> StrategySpec:
    path = Path(path)
    spec = _validate(StrategySpec, load_json(path), path)
    logger.info(f"Loaded {spec.kind} strategy '{spec.label}' from {path}")
    return spec


def detect_format(path: Union[str, Path]) -> SymbolFormat:
    """Guess a symbol format from the file extension: .txt digits, .tok tokens, anything else bits"""
    suffix = Path(path).suffix.lower()
    if suffix == ".txt":
        return "digits"
    if suffix in (".tok", ".csv"):
        return "tokens"
    return "bits"


def _as_symbol(value: float):
    return int(value) if float(value).is_integer() else float(value)


def read_symbols(path: Union[str, Path], family: ModelFamily, fmt: SymbolFormat = None) -> list:
    """Read a symbol file and check every symbol against the family's alphabet"""
    path = Path(path)
    fmt = fmt or detect_format(path)
    if fmt not in SUPPORTED_FORMATS:
        raise ConfigurationError(f"Unsupported symbol format '{fmt}'; choose from {SUPPORTED_FORMATS}")
    try:
        raw = path.read_bytes()
    except OSError as e:
        logger.error(f"Could not read {path}: {e}")
        raise ConfigurationError(f"{path}: {e.strerror or e}")
    if fmt == "bits":
        symbols = np.unpackbits(np.frombuffer(raw, dtype=np.uint8)).tolist()
    elif fmt == "digits":
        text = re.sub(r"\s+", "", raw.decode("utf-8", errors="replace"))
        if not text.isdigit() and text:
            raise DomainError(f"{path}: digits format accepts only the characters 0-9")
        symbols = [int(c) for c in text]
    else:
        tokens = [t for t in re.split(r"[\s,]+", raw.decode("utf-8", errors="replace")) if t]
        try:
            symbols = [_as_symbol(float(t)) for t in tokens]
        except ValueError as e:
            raise DomainError(f"{path}: {e}")
    family.indices(symbols)
    logger.info(f"Read {len(symbols)} symbols from {path} ({fmt})")
    return symbols


def write_symbols(path: Union[str, Path], symbols: List, fmt: SymbolFormat) -> None:
    path = Path(path)
    values = [_as_symbol(s) for s in symbols]
    if fmt == "bits":
        if len(values) % 8:
            raise ConfigurationError(f"{len(values)} binary symbols do not fill whole bytes")
        path.write_bytes(np.packbits(np.asarray(values, dtype=np.uint8)).tobytes())
    elif fmt == "digits":
        path.write_text("".join(str(v) for v in values), encoding="utf-8")
    else:
        path.write_text(" ".join(str(v) for v in values) + "\n", encoding="utf-8")
    logger.info(f"Wrote {len(values)} symbols to {path} ({fmt})")
