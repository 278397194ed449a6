import argparse
import copy
import json
import logging
import os
import sys
import time

import numpy as np
from dotenv import load_dotenv  # .env 파일에서 환경 변수 로드

from bie import IllConditionedError, MeshTooCoarseError
from comparison1d import (
    DomainTooSmallError,
    IneligibleGeometryError,
    IntegratorError,
    conjecture_test,
    default_conjecture_params,
)
from export_results import config_hash, write_csv_with_provenance, write_json_summary
from geometry import GeometryError, MeshParams, build_geometry
from greens import EnergySpec, KernelError, ThresholdError, essential_threshold, run_kernel_check
from scattering import (
    GridSpec,
    amplitudes_from_field,
    asymptote_residual,
    energy_sweep,
    probe_grid,
    solution_field_map,
    solve_scattering,
)
from specfun import QuadratureError
from spectrum import NoDeformationError, bound_states_frame, find_bound_states, scan_smallest_singular

logger = logging.getLogger(__name__)

# .env 파일 로드 (LEAKY_OUT_DIR, LEAKY_JOBS)
load_dotenv()

VERSION = "0.3.0"

# --- 기본값 표 (--show-defaults 로 출력) ---
DEFAULTS = {
    "alpha": 5.0,
    "mesh": {"nodes_per_panel": 16, "panel_length": 0.25},
    "params": {
        "scatter-sweep": {
            "lambda_min": None,             # None 이면 -0.95·α²/4
            "lambda_max": None,             # None 이면 -0.05·α²/4
            "lambda_count": 21,
            "direction": "left",
            "convention": "second",
        },
        "field": {
            "lambda": None,                 # None 이면 -α²/8
            "direction": "left",
            "x1_min": None,                 # None 이면 상자 바깥 1.25·30/α 까지
            "x1_max": None,
            "n_x1": 401,
            "x2_values": [0.0],
        },
        "spectrum": {
            "scan_min": None,               # None 이면 -1.2·α²/4
            "scan_max": None,               # None 이면 -1.01·α²/4
            "resolution": None,             # None 이면 α²/4000
        },
        "conjecture": {"k": 1.0, "alphas": [5.0, 10.0, 20.0, 40.0]},
        "kernel-check": {},
    },
    "tolerances": {
        "probe_factor": 30.0,
        "probe_fraction": 0.2,
        "detection_factor": 1e-6,
        "unitarity_warn": 1e-3,
    },
    "out_dir": "results",
    "jobs": 1,
}

TASKS = ("scatter-sweep", "field", "spectrum", "conjecture", "kernel-check")
SUBCOMMANDS = {
    "scatter": "scatter-sweep",
    "field": "field",
    "spectrum": "spectrum",
    "conjecture": "conjecture",
    "selftest": "kernel-check",
}
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


class ConfigError(ValueError):
    """잘못된 설정. field 는 문제가 된 항목의 경로."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


# --- 설정 처리 ---
def load_config(config_path: str) -> dict:
    if not os.path.exists(config_path):
        raise ConfigError("--config", f"file '{config_path}' not found")
    with open(config_path, "r", encoding="utf-8") as f:
        try:
            config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("--config", f"invalid JSON ({e})") from e
    if not isinstance(config, dict):
        raise ConfigError("--config", "top level must be a JSON object")
    config["_base_dir"] = os.path.dirname(os.path.abspath(config_path))
    return config


def _number(section: dict, key: str, path: str, positive: bool = False) -> float:
    value = section.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    return float(value)


def _resolve_geometry(raw, base_dir: str) -> dict:
    if raw is None:
        raise ConfigError("geometry", "required for this task")
    if isinstance(raw, str):
        # 경로가 절대 경로가 아니면, 설정 파일 위치 기준으로 구성
        path = raw if os.path.isabs(raw) else os.path.join(base_dir, raw)
        if not os.path.exists(path):
            raise ConfigError("geometry", f"geometry file '{path}' not found")
        with open(path, "r", encoding="utf-8") as f:
            try:
                raw = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError("geometry", f"invalid JSON in '{path}' ({e})") from e
    if not isinstance(raw, dict):
        raise ConfigError("geometry", "must be an object, a fixture reference or a file path")
    return raw


def normalize_config(raw: dict, task: str) -> dict:
    """기본값을 합치고 과제별 필수 항목과 에너지 범위를 검사한다."""
    cfg_task = raw.get("task", task)
    if cfg_task not in TASKS:
        raise ConfigError("task", f"unknown task '{cfg_task}' (expected one of {TASKS})")
    if cfg_task != task:
        raise ConfigError("task", f"config task '{cfg_task}' does not match subcommand task '{task}'")
    unknown = set(raw) - {"task", "geometry", "alpha", "mesh", "params", "tolerances", "_base_dir"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level field")

    cfg = {"task": task}
    cfg["alpha"] = _number({"alpha": raw.get("alpha", DEFAULTS["alpha"])}, "alpha", "alpha", positive=True)
    alpha = cfg["alpha"]

    mesh = dict(DEFAULTS["mesh"])
    mesh.update(raw.get("mesh") or {})
    if not isinstance(mesh.get("nodes_per_panel"), int) or mesh["nodes_per_panel"] < 2:
        raise ConfigError("mesh.nodes_per_panel", f"expected an integer >= 2, got {mesh.get('nodes_per_panel')!r}")
    _number(mesh, "panel_length", "mesh.panel_length", positive=True)
    cfg["mesh"] = mesh

    params = copy.deepcopy(DEFAULTS["params"][task])
    user_params = raw.get("params") or {}
    if not isinstance(user_params, dict):
        raise ConfigError("params", "must be an object")
    for key in user_params:
        if key not in params:
            raise ConfigError(f"params.{key}", f"not a parameter of task '{task}'")
    params.update(user_params)
    if "direction" in params and params["direction"] not in ("left", "right"):
        raise ConfigError("params.direction", f"expected 'left' or 'right', got {params['direction']!r}")
    if "convention" in params and params["convention"] not in ("second", "first"):
        raise ConfigError("params.convention", f"expected 'second' or 'first', got {params['convention']!r}")

    tolerances = dict(DEFAULTS["tolerances"])
    for key, value in (raw.get("tolerances") or {}).items():
        if key not in tolerances:
            raise ConfigError(f"tolerances.{key}", "unknown tolerance")
        tolerances[key] = _number({key: value}, key, f"tolerances.{key}", positive=True)
    cfg["tolerances"] = tolerances

    quarter = 0.25 * alpha * alpha
    if task == "scatter-sweep":
        params["lambda_min"] = -0.95 * quarter if params["lambda_min"] is None else params["lambda_min"]
        params["lambda_max"] = -0.05 * quarter if params["lambda_max"] is None else params["lambda_max"]
        lo = _number(params, "lambda_min", "params.lambda_min")
        hi = _number(params, "lambda_max", "params.lambda_max")
        if not (-quarter < lo <= hi < 0.0):
            raise ConfigError("params.lambda_min", f"lambda range must lie inside ({-quarter:g}, 0), got [{lo:g}, {hi:g}]")
        if not isinstance(params["lambda_count"], int) or params["lambda_count"] < 1:
            raise ConfigError("params.lambda_count", "expected a positive integer")
    elif task == "field":
        params["lambda"] = -0.5 * quarter if params["lambda"] is None else params["lambda"]
        lam = _number(params, "lambda", "params.lambda")
        if not -quarter < lam < 0.0:
            raise ConfigError("params.lambda", f"must lie inside ({-quarter:g}, 0), got {lam:g}")
        bounds = [None if params[key] is None else _number(params, key, f"params.{key}") for key in ("x1_min", "x1_max")]
        if None not in bounds and not bounds[0] < bounds[1]:
            raise ConfigError("params.x1_min", f"expected x1_min < x1_max, got [{bounds[0]:g}, {bounds[1]:g}]")
        if isinstance(params["n_x1"], bool) or not isinstance(params["n_x1"], int) or params["n_x1"] < 2:
            raise ConfigError("params.n_x1", f"expected an integer >= 2, got {params['n_x1']!r}")
        x2_values = params["x2_values"]
        if not isinstance(x2_values, list) or not x2_values:
            raise ConfigError("params.x2_values", "expected a non-empty list of numbers")
        for i, x2 in enumerate(x2_values):
            _number({"x2": x2}, "x2", f"params.x2_values[{i}]")
    elif task == "spectrum":
        params["scan_min"] = -1.2 * quarter if params["scan_min"] is None else params["scan_min"]
        params["scan_max"] = -1.01 * quarter if params["scan_max"] is None else params["scan_max"]
        lo = _number(params, "scan_min", "params.scan_min")
        hi = _number(params, "scan_max", "params.scan_max")
        if not lo < hi < -quarter:
            raise ConfigError("params.scan_max", f"scan range must lie below {-quarter:g}, got [{lo:g}, {hi:g}]")
    elif task == "conjecture":
        k = _number(params, "k", "params.k", positive=True)
        alphas = params.get("alphas")
        if not isinstance(alphas, list) or not alphas:
            raise ConfigError("params.alphas", "expected a non-empty list of numbers")
        for i, a in enumerate(alphas):
            a = _number({"a": a}, "a", f"params.alphas[{i}]", positive=True)
            if not k < 0.5 * a:
                raise ConfigError(f"params.alphas[{i}]", f"alpha={a:g} too small for k={k:g} (need k < alpha/2)")
    cfg["params"] = params

    if task != "kernel-check":
        cfg["geometry"] = _resolve_geometry(raw.get("geometry"), raw.get("_base_dir", os.getcwd()))
    return cfg


# --- 과제 실행 ---
def _mesh_params(cfg: dict) -> MeshParams:
    return MeshParams(cfg["mesh"]["nodes_per_panel"], float(cfg["mesh"]["panel_length"]))


def _csv(df, out_dir: str, name: str, digest: str) -> str:
    return write_csv_with_provenance(df, os.path.join(out_dir, name), digest, VERSION)


def run_scatter_sweep(cfg, geom, out_dir, digest, jobs) -> dict:
    p = cfg["params"]
    lambdas = np.linspace(p["lambda_min"], p["lambda_max"], p["lambda_count"])
    df = energy_sweep(geom, cfg["alpha"], lambdas, _mesh_params(cfg), jobs, p["direction"], p["convention"])
    worst = float(df["defect"].max())
    if worst > cfg["tolerances"]["unitarity_warn"]:
        logger.warning("Largest unitarity defect %.2e exceeds %.0e", worst, cfg["tolerances"]["unitarity_warn"])
    path = _csv(df, out_dir, "scatter_sweep.csv", digest)
    return {"csv": path, "rows": len(df), "max_unitarity_defect": worst, "N": int(df["N"].iloc[0])}


def run_field(cfg, geom, out_dir, digest, jobs) -> dict:
    p, tol = cfg["params"], cfg["tolerances"]
    energy = EnergySpec(cfg["alpha"], float(p["lambda"]))
    solution = solve_scattering(geom, energy, _mesh_params(cfg), p["direction"])
    default_grid = probe_grid(geom, cfg["alpha"], p["n_x1"], tol["probe_factor"], x2_values=p["x2_values"])
    grid = GridSpec(
        default_grid.x1_min if p["x1_min"] is None else float(p["x1_min"]),
        default_grid.x1_max if p["x1_max"] is None else float(p["x1_max"]),
        int(p["n_x1"]),
        tuple(float(x) for x in p["x2_values"]),
    )
    field = solution_field_map(solution, geom, grid)
    path = _csv(field.to_frame(), out_dir, "field_map.csv", digest)
    amps = solution.amplitudes
    summary = {"csv": path, "T": amps.T, "R": amps.R, "unitarity_defect": amps.unitarity_defect,
               "N": amps.N, "skipped_points": int(field.skipped.sum())}
    try:
        summary["asymptote_residual"] = asymptote_residual(field, amps, geom, tol["probe_fraction"], tol["probe_factor"])
        T_fit, R_fit = amplitudes_from_field(field, geom, tol["probe_fraction"], tol["probe_factor"])
        summary["T_from_field"], summary["R_from_field"] = T_fit, R_fit
    except ValueError as e:
        # 격자가 원거리 영역에 닿지 않으면 잔차 없이 장만 저장
        logger.warning("Asymptote residual not computed: %s", e)
        summary["asymptote_residual"] = None
    return summary


def run_spectrum(cfg, geom, out_dir, digest, jobs) -> dict:
    p = cfg["params"]
    alpha = cfg["alpha"]
    scan_range = (float(p["scan_min"]), float(p["scan_max"]))
    params = _mesh_params(cfg)
    if geom.is_flat:
        # 변형이 없으면 Θ 가 비어 있으므로 주사하지 않는다
        logger.info("No deformation, no discrete spectrum")
        return {"bound_states": [], "threshold": essential_threshold(alpha)}
    scan = scan_smallest_singular(geom, alpha, scan_range, p["resolution"], params, jobs)
    path = _csv(scan, out_dir, "spectrum_scan.csv", digest)
    states = find_bound_states(geom, alpha, scan_range, p["resolution"], params, jobs,
                               detection=cfg["tolerances"]["detection_factor"] * alpha, scan=scan)
    frame = bound_states_frame(states)
    return {"csv": path, "threshold": essential_threshold(alpha), "bound_states": frame.to_dict(orient="records")}


def run_conjecture(cfg, geom, out_dir, digest, jobs) -> dict:
    p = cfg["params"]
    base = _mesh_params(cfg)
    report = conjecture_test(geom, float(p["k"]), [float(a) for a in p["alphas"]],
                             lambda a: default_conjecture_params(a, base), jobs)
    path = _csv(report.rows, out_dir, "conjecture.csv", digest)
    return {"csv": path, "k": report.k, "disc_phasemin": report.discrepancies.tolist(),
            "phasemin_strictly_decreasing": report.is_decreasing()}


def run_kernel_check_task(cfg, geom, out_dir, digest, jobs) -> dict:
    rows = run_kernel_check()
    return {"checks": rows, "all_passed": all(r["passed"] for r in rows)}


RUNNERS = {
    "scatter-sweep": run_scatter_sweep,
    "field": run_field,
    "spectrum": run_spectrum,
    "conjecture": run_conjecture,
    "kernel-check": run_kernel_check_task,
}


def run(cfg: dict, out_dir: str, jobs: int = 1) -> int:
    """정규화된 설정 하나를 실행하고 종료 코드를 돌려준다."""
    start_time = time.time()
    task = cfg["task"]
    digest = config_hash(cfg)
    logger.info("=== Starting task '%s' (config %s, version %s) ===", task, digest[:12], VERSION)
    status = EXIT_OK
    summary = {"task": task, "version": VERSION, "config_hash": digest, "tolerances": cfg["tolerances"]}

    try:
        geom = build_geometry(cfg["geometry"]) if "geometry" in cfg else None
        if geom is not None:
            logger.info("Geometry '%s': %s", geom.name, geom.describe()["segments"])
        summary["result"] = RUNNERS[task](cfg, geom, out_dir, digest, jobs)
        if task == "kernel-check" and not summary["result"]["all_passed"]:
            logger.error("Kernel check failed: %s", [r["check"] for r in summary["result"]["checks"] if not r["passed"]])
            status = EXIT_NUMERICAL
    except (GeometryError, IneligibleGeometryError) as e:
        logger.error("Invalid geometry: %s", e)
        summary["error"] = str(e)
        status = EXIT_CONFIG
    except (ThresholdError, KernelError, QuadratureError, IllConditionedError, MeshTooCoarseError,
            NoDeformationError, IntegratorError, DomainTooSmallError) as e:
        logger.error("Numerical failure (%s): %s", type(e).__name__, e)
        summary["error"] = f"{type(e).__name__}: {e}"
        status = EXIT_NUMERICAL
    except ValueError as e:
        # 정규화에서 걸러지지 않은 입력 조합 (예: 기본 격자와 어긋난 x1 한쪽 경계)
        logger.error("Invalid input: %s", e)
        summary["error"] = str(e)
        status = EXIT_CONFIG

    duration = time.time() - start_time
    summary["status"] = "ok" if status == EXIT_OK else "failed"
    summary["duration_seconds"] = round(duration, 3)
    write_json_summary(summary, os.path.join(out_dir, "summary.json"))
    final_status_message = "successfully" if status == EXIT_OK else "with ERRORS"
    logger.info("=== Task '%s' completed %s (duration: %.2f seconds) ===", task, final_status_message, duration)
    return status


# --- 명령줄 ---
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Leaky-wire scattering and bound-state solver")
    parser.add_argument("--show-defaults", action="store_true", help="print the defaults table as JSON and exit")
    sub = parser.add_subparsers(dest="command")
    for name, task in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the '{task}' task")
        p.add_argument("--config", help="path to the JSON run configuration")
        p.add_argument("--out", help="output directory (default: $LEAKY_OUT_DIR or 'results')")
        p.add_argument("--jobs", type=int, help="worker processes for sweeps (default: $LEAKY_JOBS or 1)")
        p.add_argument("--show-defaults", action="store_true", default=argparse.SUPPRESS,
                       help="print the defaults table as JSON and exit")
    return parser


def _env_jobs() -> int:
    value = os.environ.get("LEAKY_JOBS")
    if value is None:
        return DEFAULTS["jobs"]
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError("LEAKY_JOBS", f"expected an integer, got {value!r}")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    args = build_parser().parse_args(argv)
    if args.show_defaults:
        print(json.dumps(DEFAULTS, indent=2, sort_keys=True))
        return EXIT_OK
    if args.command is None:
        build_parser().print_help()
        return EXIT_CONFIG

    task = SUBCOMMANDS[args.command]
    try:
        raw = load_config(args.config) if args.config else {}
        if not args.config and task != "kernel-check":
            raise ConfigError("--config", f"required for the '{args.command}' subcommand")
        cfg = normalize_config(raw, task)
        jobs = args.jobs if args.jobs is not None else _env_jobs()
        if jobs < 1:
            raise ConfigError("--jobs", f"must be at least 1, got {jobs}")
    except ConfigError as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG

    out_dir = args.out or os.environ.get("LEAKY_OUT_DIR") or DEFAULTS["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    return run(cfg, out_dir, jobs)


# --- 스크립트 직접 실행 시 ---
if __name__ == "__main__":
    sys.exit(main())
