import hashlib
import json
import logging
import os

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# --- 설정값 ---
FLOAT_FORMAT = "%.17g"
LINE_TERMINATOR = "\n"


def config_hash(config: dict) -> str:
    """정규화된 설정 JSON (키 정렬, 공백 없음) 의 SHA-256."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_to_builtin)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _to_builtin(value):
    # numpy 스칼라/배열, 복소수를 JSON 이 아는 형태로
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, (tuple, set)):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_csv_with_provenance(df: pd.DataFrame, csv_filepath: str, config_hash_hex: str, version: str) -> str:
    """첫 줄에 '# config_hash=<hex> version=<v>' 를 쓰고 그 아래에 표를 쓴다.

    같은 설정과 버전이면 바이트 단위로 같은 파일이 나온다.
    """
    _ensure_parent(csv_filepath)
    with open(csv_filepath, "w", encoding="utf-8", newline="") as f:
        f.write(f"# config_hash={config_hash_hex} version={version}{LINE_TERMINATOR}")
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator=LINE_TERMINATOR)
    logger.info("Saved %d row(s) to '%s'", len(df), csv_filepath)
    return csv_filepath


def read_csv_with_provenance(csv_filepath: str):
    """(DataFrame, {'config_hash': ..., 'version': ...})"""
    if not os.path.exists(csv_filepath) or os.path.getsize(csv_filepath) == 0:
        raise FileNotFoundError(f"result CSV '{csv_filepath}' is missing or empty")
    with open(csv_filepath, "r", encoding="utf-8") as f:
        header = f.readline().strip()
    meta = {}
    if header.startswith("#"):
        for item in header.lstrip("# ").split():
            key, _, value = item.partition("=")
            meta[key] = value
    df = pd.read_csv(csv_filepath, comment="#")
    return df, meta


def write_json_summary(summary: dict, json_filepath: str) -> str:
    _ensure_parent(json_filepath)
    with open(json_filepath, "w", encoding="utf-8") as f:
        json.dump(summary, f, ensure_ascii=False, indent=2, sort_keys=True, default=_to_builtin)
        f.write("\n")
    logger.info("Saved summary to '%s'", json_filepath)
    return json_filepath


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    demo = pd.DataFrame({"lambda": [-3.125], "re_T": [1.0], "im_T": [0.0]})
    digest = config_hash({"task": "demo"})
    write_csv_with_provenance(demo, "demo_results.csv", digest, "dev")
    print(read_csv_with_provenance("demo_results.csv"))
