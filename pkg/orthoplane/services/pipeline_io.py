"""
Pipeline I/O service
PFM and PNG containers, mixture-field directories, run configuration loading
and the run manifest
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, NamedTuple, Optional, Union

import cv2
import numpy as np
import pandas as pd
import pydantic
import scipy
import yaml

from .. import __version__
from ..core.exceptions import ConfigError, FormatError
from ..core.logging_config import get_logger
from ..core.settings import get_settings
from ..schemas.config import RunConfig
from ..schemas.scene import SceneSpec
from .mixture_model import MixtureField

logger = get_logger(__name__)

PathLike = Union[str, Path]

PNG16_SCALE = 256.0
PNG16_MAX = 65535
FIELD_MANIFEST = "field.json"
FIELD_LOGITS = "logits.npy"
FIELD_SCALES = "scales.npy"
RUN_MANIFEST = "manifest.json"


class DisparityMap(NamedTuple):
    disparity: np.ndarray
    valid: np.ndarray


# ============= Portable FloatMap =============

def write_pfm(path: PathLike, data: np.ndarray) -> None:
    """
    Write H×W ("Pf") or H×W×3 ("PF") float32, little-endian, rows bottom
    to top. Wider types are narrowed to float32.
    """
    data = np.asarray(data)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[..., 0]
    if data.ndim == 2:
        tag = "Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        tag = "PF"
    else:
        raise FormatError(f"PFM holds 1 or 3 channels, got shape {data.shape}", field=str(path))

    height, width = data.shape[:2]
    payload = np.ascontiguousarray(np.flipud(data).astype("<f4"))
    with open(path, "wb") as f:
        f.write(f"{tag}\n{width} {height}\n-1.0\n".encode("ascii"))
        f.write(payload.tobytes())


def read_pfm(path: PathLike) -> np.ndarray:
    """Read a PFM map as float32, H×W or H×W×3, top row first"""
    with open(path, "rb") as f:
        tag = f.readline().strip()
        if tag == b"Pf":
            channels = 1
        elif tag == b"PF":
            channels = 3
        else:
            raise FormatError(f"not a PFM header: {tag[:8]!r}", field=str(path))

        try:
            dims = f.readline().split()
            width, height = int(dims[0]), int(dims[1])
            scale = float(f.readline().strip())
        except (IndexError, ValueError) as e:
            raise FormatError(f"malformed PFM header: {e}", field=str(path))
        if width < 1 or height < 1 or scale == 0:
            raise FormatError(f"invalid PFM dimensions {width}x{height} or scale {scale}", field=str(path))

        dtype = "<f4" if scale < 0 else ">f4"
        expected = width * height * channels
        data = np.frombuffer(f.read(expected * 4), dtype=dtype)

    if data.size != expected:
        raise FormatError(f"truncated PFM payload: {data.size} of {expected} values", field=str(path))
    shape = (height, width) if channels == 1 else (height, width, 3)
    return np.flipud(data.reshape(shape)).astype(np.float32)


# ============= PNG Containers =============

def _imwrite(path: PathLike, data: np.ndarray) -> None:
    if not cv2.imwrite(str(path), data):
        raise FormatError("image encoder rejected the write", field=str(path))


def _imread(path: PathLike, flags: int) -> np.ndarray:
    data = cv2.imread(str(path), flags)
    if data is None:
        raise FormatError("cannot decode image", field=str(path))
    return data


def write_disparity_png16(path: PathLike, disparity: np.ndarray, valid: Optional[np.ndarray] = None) -> None:
    """Stored value round(256·d); 0 marks invalid, valid values are kept >= 1"""
    disparity = np.asarray(disparity, dtype=np.float64)
    ok = np.isfinite(disparity) & (disparity > 0)
    if valid is not None:
        ok &= np.asarray(valid, dtype=bool)
    stored = np.clip(np.round(PNG16_SCALE * np.where(ok, disparity, 0.0)), 1, PNG16_MAX)
    _imwrite(path, np.where(ok, stored, 0).astype(np.uint16))


def read_disparity_png16(path: PathLike) -> DisparityMap:
    stored = _imread(path, cv2.IMREAD_ANYDEPTH)
    if stored.dtype != np.uint16:
        raise FormatError(f"expected a 16-bit PNG, got {stored.dtype}", field=str(path))
    return DisparityMap(disparity=stored.astype(np.float64) / PNG16_SCALE, valid=stored > 0)


def write_mask_png(path: PathLike, mask: np.ndarray) -> None:
    """8-bit grayscale, value round(255·m)"""
    values = np.clip(np.asarray(mask, dtype=np.float64), 0.0, 1.0)
    _imwrite(path, np.round(255.0 * values).astype(np.uint8))


def read_mask_png(path: PathLike) -> np.ndarray:
    return _imread(path, cv2.IMREAD_GRAYSCALE).astype(np.float64) / 255.0


def write_image_png(path: PathLike, image: np.ndarray) -> None:
    """RGB image in [0, 1] as 8-bit PNG"""
    values = np.round(255.0 * np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)).astype(np.uint8)
    if values.ndim == 3:
        values = cv2.cvtColor(values, cv2.COLOR_RGB2BGR)
    _imwrite(path, values)


def write_disparity(path_stem: PathLike, disparity: np.ndarray, fmt: str, valid: Optional[np.ndarray] = None) -> Path:
    """Write a disparity map as `<stem>.pfm` or `<stem>.png`; invalid pixels become 0"""
    path_stem = Path(path_stem)
    if fmt == "png16":
        path = path_stem.with_suffix(".png")
        write_disparity_png16(path, disparity, valid)
    elif fmt == "pfm":
        path = path_stem.with_suffix(".pfm")
        values = np.asarray(disparity, dtype=np.float64)
        write_pfm(path, values if valid is None else np.where(valid, values, 0.0))
    else:
        raise FormatError(f"unknown disparity format {fmt!r}", field="format")
    return path


# ============= Mixture Field Directories =============

def save_mixture_field(directory: PathLike, field: MixtureField) -> None:
    """Full-precision logits.npy and scales.npy (H×W×N float64), plus field.json"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.save(directory / FIELD_LOGITS, field.logits)
    np.save(directory / FIELD_SCALES, field.scales)
    manifest = {
        "n_planes": field.n_planes,
        "height": field.shape[0],
        "width": field.shape[1],
        "dtype": str(field.logits.dtype),
        "sigma_min": field.sigma_min,
        "residuals": None if field.residuals is None else [float(r) for r in field.residuals],
    }
    (directory / FIELD_MANIFEST).write_text(json.dumps(manifest, indent=2))
    logger.debug(f"Saved mixture field with {field.n_planes} planes to {directory}")


def _load_field_array(path: Path) -> np.ndarray:
    try:
        return np.load(path, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise FormatError(f"unreadable field array: {e}", field=str(path))


def load_mixture_field(directory: PathLike) -> MixtureField:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / FIELD_MANIFEST).read_text())
        shape = (int(manifest["height"]), int(manifest["width"]), int(manifest["n_planes"]))
    except (OSError, ValueError, KeyError) as e:
        raise FormatError(f"unreadable field manifest: {e}", field=str(directory / FIELD_MANIFEST))

    logits = _load_field_array(directory / FIELD_LOGITS)
    scales = _load_field_array(directory / FIELD_SCALES)
    if logits.shape != shape or scales.shape != shape:
        raise FormatError("field arrays do not match the manifest size", field=str(directory))
    return MixtureField(
        logits=logits,
        scales=scales,
        residuals=manifest.get("residuals"),
        sigma_min=float(manifest.get("sigma_min", 1e-4)),
    )


# ============= Scenes =============

def save_scene(path: PathLike, scene: SceneSpec) -> None:
    Path(path).write_text(scene.model_dump_json(indent=2))


def load_scene(path: PathLike) -> SceneSpec:
    try:
        return SceneSpec.model_validate_json(Path(path).read_text())
    except pydantic.ValidationError as e:
        raise FormatError(f"invalid scene file: {e.errors()[0]['msg']}", field=str(path))


# ============= Run Configuration =============

def load_defaults(path: Optional[PathLike] = None) -> Dict[str, Any]:
    """Section defaults from the YAML defaults file (Settings.defaults_file when no path is given)"""
    path = Path(path) if path is not None else get_settings().defaults_file
    if not path.exists():
        logger.warning(f"⚠️  Defaults file {path} not found; using schema defaults")
        return {}
    with open(path, "r") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError("defaults file must hold a mapping", field=str(path))
    return data


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively overlay `override` on `base`; neither input is modified"""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _first_error_path(error: pydantic.ValidationError) -> str:
    loc = error.errors()[0].get("loc", ())
    return ".".join(str(part) for part in loc) or "<root>"


def parse_run_config(data: Dict[str, Any], defaults: Optional[Dict[str, Any]] = None) -> RunConfig:
    merged = deep_merge(load_defaults() if defaults is None else defaults, data)
    try:
        return RunConfig.model_validate(merged)
    except pydantic.ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid run config: {details}", field=_first_error_path(e))


def load_run_config(path: PathLike) -> RunConfig:
    """JSON run config deep-merged over the YAML defaults, then validated"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}", field=str(path))
    if not text.strip():
        raise ConfigError("config file is empty", field=str(path))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}", field=str(path))
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", field=str(path))
    return parse_run_config(data)


# ============= Manifest =============

def package_versions() -> Dict[str, str]:
    return {
        "orthoplane": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "opencv": cv2.__version__,
        "pandas": pd.__version__,
        "pyyaml": yaml.__version__,
    }


def config_digest(config: RunConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(
    out_dir: PathLike,
    config: RunConfig,
    stage: str,
    seed: Optional[int] = None,
    outputs: Optional[Dict[str, str]] = None,
) -> Path:
    """Record the stage in <out>/manifest.json, keeping entries of earlier stages"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RUN_MANIFEST
    manifest = json.loads(path.read_text()) if path.exists() else {"stages": {}}
    manifest["config_sha256"] = config_digest(config)
    manifest["versions"] = package_versions()
    if seed is not None:
        manifest["seed"] = seed
    manifest["stages"][stage] = {"outputs": outputs or {}}
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path
