# src/cli.py
#
# Línea de órdenes del laboratorio.
#   python -m src.cli <subcomando> --config exp.json [--seed N] [--out DIR] [--threads N]
# Código de salida: 0 éxito, 2 fallo de una suite de verificación, 1 error.

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from src.config import settings, log
from src.core.errors import ConfigError, LabError
from src.models.experiment_models import ExperimentConfig, load_config
from src.models.report_models import BoundSuiteReport, ExperimentReport
from src.modules import experiment_runner as runner
from src.modules.report_writer import emit_report
from src.modules.sweep_store import load_sweep, save_sweep, save_trace
from src.modules.time_synthesis import synthesize_time_trace

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("falta --config")
    cfg = load_config(args.config)
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.out is not None:
        update["output_dir"] = args.out
    return cfg.model_copy(update=update) if update else cfg


def _out(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir)


# --- SUBCOMANDOS ---

def cmd_synth(args) -> int:
    cfg = _config(args)
    exp = runner.prepare(cfg, with_gradients=False, threads=args.threads)
    path = save_sweep(_out(cfg) / f"{cfg.name}.sweep.bin", exp.clean, cfg.config_hash())
    print(path)
    return EXIT_OK


def cmd_noise(args) -> int:
    cfg = _config(args)
    sweep_path = Path(args.sweep) if args.sweep else _out(cfg) / f"{cfg.name}.sweep.bin"
    noisy = runner.add_noise(load_sweep(sweep_path), cfg.epsilon_target, cfg.seed)
    path = save_sweep(_out(cfg) / f"{cfg.name}.noisy.bin", noisy, cfg.config_hash())
    print(path)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _config(args)
    exp = runner.prepare(cfg, with_gradients=False, threads=args.threads)
    sweep = load_sweep(args.sweep) if args.sweep else exp.clean
    k_cut = args.k_cut / exp.domain.diameter if args.k_cut else None
    trace = synthesize_time_trace(sweep, k_cut, dt=runner.solver_dt(exp))
    save_trace(_out(cfg) / f"{cfg.name}.trace.bin", trace, cfg.config_hash())
    _, errs = runner.reconstruct(exp, sweep, k_cut)
    print(json.dumps(errs, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_sweep_k(args) -> int:
    cfg = _config(args)
    report = runner.run_sweep(cfg, threads=args.threads)
    for path in emit_report(report, _out(cfg)):
        print(path)
    return EXIT_OK if all(r.status == "ok" for r in report.rows) else EXIT_ERROR


def cmd_verify_bounds(args) -> int:
    cfg = _config(args)
    report = runner.verify_bounds(cfg, threads=args.threads)
    for path in emit_report(report, _out(cfg), stem=f"{cfg.name}_bounds"):
        print(path)
    return EXIT_OK if report.passed else EXIT_FAILED


def _single_check(result) -> int:
    print(result.model_dump_json(indent=2))
    return EXIT_OK if result.passed else EXIT_FAILED


def cmd_check_duality(args) -> int:
    return _single_check(runner.check_duality(_config(args)))


def cmd_check_huygens(args) -> int:
    return _single_check(runner.check_huygens(_config(args)))


def cmd_report(args) -> int:
    """Re-emite CSV/SVG a partir de un JSON de informe ya escrito."""
    path = Path(args.report)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"informe ilegible: {path}") from e
    data = json.loads(text)
    report = BoundSuiteReport.model_validate(data) if "checks" in data else ExperimentReport.model_validate(data)
    out = Path(args.out) if args.out else path.parent
    for p in emit_report(report, out, formats=args.formats.split(",")):
        print(p)
    return EXIT_OK


COMMANDS = {
    "synth": (cmd_synth, "barrido directo u(x, ω) en la frontera"),
    "noise": (cmd_noise, "añade ruido con ε-funcional fijado"),
    "reconstruct": (cmd_reconstruct, "síntesis temporal + solución hacia atrás"),
    "sweep-k": (cmd_sweep_k, "escalera de K y techo de estabilidad"),
    "verify-bounds": (cmd_verify_bounds, "suite de cotas analíticas"),
    "check-duality": (cmd_check_duality, "dualidad FDTD ↔ barrido integral"),
    "check-huygens": (cmd_check_huygens, "residuo de Huygens de la traza FDTD"),
    "report": (cmd_report, "re-emite un informe JSON"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON del experimento")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="directorio de salida")
    common.add_argument("--threads", type=int, default=None)

    parser = argparse.ArgumentParser(prog="srclab", description="Laboratorio de fuentes inversas multifrecuencia")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (fn, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=fn)
        if name in ("noise", "reconstruct"):
            p.add_argument("--sweep", default=None, help="contenedor de barrido de entrada")
        if name == "reconstruct":
            p.add_argument("--k-cut", type=float, default=None, help="banda en unidades de 1/D")
        if name == "report":
            p.add_argument("report", help="JSON de informe")
            p.add_argument("--formats", default="csv,svg")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        settings.THREADS = args.threads
    try:
        return args.func(args)
    except LabError as e:
        log.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        log.error(f"{args.command}: error inesperado: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
