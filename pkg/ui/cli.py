"""
Interfaz de línea de comandos del simulador.

Subcomandos: run, sweep, fig2, fig3, gini, usl. Las salidas tabulares se
escriben como CSV; los resúmenes van a la salida estándar.
"""
import argparse
import sys
from dataclasses import replace

from core.consensus import MechanismKind
from core.experiment import (ExperimentConfig, SweepSpec, results_frame, run, simulate_repetition, sweep,
                             write_results)
from core.gossip import FaultConfig
from core.metrics import (ParticipationLedger, UslParams, decentralization_order, gini, relative_spread,
                          trend, usl_curve, usl_peak)
from core.topology import TopologyConfig
from shared.config import load_experiment_config, load_sweep_spec
from shared.errors import ConfigError, ResultsWriteError, SweepCapError
from shared.export import export_repetition
from shared.settings import configure_logging, load_settings

FIG2_LAMBDAS = [100 * i for i in range(1, 11)]
FIG3_P_FAIL = [round(0.1 * i, 10) for i in range(10)]
FIG3_POW_R_CLS = [0.1, 0.3, 0.5]
POS_PRESET = {"kind": "PoS", "r_v": 0.2}
POC_PRESET = {"kind": "PoC", "n_w": 50, "r_sfl": 0.9, "delta_sfl": 0}


def fig2_spec(seed=0, rcls_baseline=0.5, repetitions=20, rounds=1000) -> SweepSpec:
    """R frente a λ para PoW, PoS y PoC con p_fail = 5 % y 10 transacciones por bloque."""
    base = ExperimentConfig(topology=TopologyConfig(r_cls=rcls_baseline), fault=FaultConfig(p_fail=0.05),
                            n_tx=10, k_rounds=rounds, repetitions=repetitions, seed=seed)
    axes = {
        "mechanism": [{"kind": "PoW"}, dict(POS_PRESET), dict(POC_PRESET)],
        "lambda": list(FIG2_LAMBDAS),
    }
    return SweepSpec(base=base, axes=axes)


def fig3_spec(seed=0, rcls_baseline=0.5, repetitions=20, rounds=1000) -> SweepSpec:
    """G frente a p_fail: PoW con tres r_cls, PoS y PoC en el r_cls de referencia."""
    base = ExperimentConfig(topology=TopologyConfig(lambda_=400.0), n_tx=10, k_rounds=rounds,
                            repetitions=repetitions, seed=seed)
    variants = [{"mechanism": {"kind": "PoW"}, "r_cls": r_cls} for r_cls in FIG3_POW_R_CLS]
    variants.append({"mechanism": dict(POS_PRESET), "r_cls": rcls_baseline})
    variants.append({"mechanism": dict(POC_PRESET), "r_cls": rcls_baseline})
    return SweepSpec(base=base, axes={"variant": variants, "p_fail": list(FIG3_P_FAIL)})


def _with_seed(config: ExperimentConfig, seed) -> ExperimentConfig:
    return config if seed is None else replace(config, seed=seed).validate()


def _series_label(row) -> str:
    return f"{row['mechanism']} r_cls={row['r_cls']:g}"


def cmd_run(args) -> int:
    config = _with_seed(load_experiment_config(args.config), args.seed)
    result = run(config, workers=args.workers)
    write_results([result], args.out)
    print(f"Mecanismo: {config.mechanism.label}")
    print(f"R = {result.R_mean:.6g} tx/s (desv. {result.R_std:.6g})")
    print(f"G = {result.G_mean:.6g} (desv. {result.G_std:.6g})")
    print(f"Rondas fallidas: {result.failure_rate:.2%}  Participantes medios: {result.mean_participants:.6g}"
          f"  Componente mayor: {result.mean_connectivity:.2%}")
    if args.export_dir:
        detail = simulate_repetition(config, 0, 0, keep_details=True)
        export_repetition(detail, args.export_dir)
        print(f"Exportación de la repetición 0 en {args.export_dir}")
    print(f"Resultados guardados en {args.out}")
    return 0


def cmd_sweep(args) -> int:
    spec = load_sweep_spec(args.config, default_cap=args.cap)
    if args.seed is not None:
        spec = replace(spec, base=_with_seed(spec.base, args.seed))
    results = sweep(spec, workers=args.workers)
    write_results(results, args.out)
    print(f"{len(results)} puntos evaluados. Resultados guardados en {args.out}")
    return 0


def cmd_fig2(args) -> int:
    spec = fig2_spec(seed=args.seed or 0, rcls_baseline=args.rcls_baseline,
                     repetitions=args.repetitions, rounds=args.rounds)
    results = sweep(spec, workers=args.workers)
    write_results(results, args.out)
    df = results_frame(results)
    table = df.pivot(index="lambda", columns="mechanism", values="R_mean")
    print("R (tx/s) frente a lambda:")
    print(table.to_string(float_format=lambda v: f"{v:.6g}"))
    if str(MechanismKind.POC) in table:
        print(f"Dispersión relativa de R en PoC: {relative_spread(table[str(MechanismKind.POC)]):.2%}")
    print(f"Resultados guardados en {args.out}")
    return 0


def cmd_fig3(args) -> int:
    spec = fig3_spec(seed=args.seed or 0, rcls_baseline=args.rcls_baseline,
                     repetitions=args.repetitions, rounds=args.rounds)
    results = sweep(spec, workers=args.workers)
    write_results(results, args.out)
    df = results_frame(results)
    df["series"] = df.apply(_series_label, axis=1)
    table = df.pivot(index="p_fail", columns="series", values="G_mean")
    print("G frente a p_fail:")
    print(table.to_string(float_format=lambda v: f"{v:.6g}"))
    for series in table.columns:
        print(f"Tendencia (Spearman) de {series}: {trend(table.index, table[series]):.3f}")
    for p_fail, row in table.iterrows():
        order = decentralization_order(row.to_dict())
        print(f"p_fail={p_fail:g}: " + " > ".join(order))
    print(f"Resultados guardados en {args.out}")
    return 0


def cmd_gini(args) -> int:
    print(f"{gini(ParticipationLedger.from_counts(args.counts)):.6f}")
    return 0


def cmd_usl(args) -> int:
    params = UslParams(alpha=args.alpha, beta=args.beta).validate()
    curve = usl_curve(args.n_max, params)
    print(curve.to_csv(index=False, float_format="%.6g", lineterminator="\n"), end="")
    peak = int(curve.loc[curve["S"].idxmax(), "n"])
    analytic = usl_peak(params)
    print(f"# máximo en n={peak}" + (f" (analítico {analytic})" if analytic is not None else ""))
    return 0


def _counts(text: str):
    try:
        values = [int(part.strip()) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"lista de enteros inválida: '{text}'") from None
    if any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("las participaciones no pueden ser negativas")
    return values


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"semilla inválida: '{text}'") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"la semilla debe ser un entero de 64 bits sin signo: {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"entero inválido: '{text}'") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"debe ser >= 1: {value}")
    return value


def build_parser(settings=None) -> argparse.ArgumentParser:
    settings = settings or load_settings()
    parser = argparse.ArgumentParser(
        prog="consenso",
        description="Simulador de consenso blockchain sobre nodos inalámbricos.")
    parser.add_argument("--log-level", default=settings.log_level,
                        help="Nivel de logging (DEBUG, INFO, WARNING, ...).")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, handler, help_text in (("run", cmd_run, "Una corrida a partir de un JSON de experimento."),
                                     ("sweep", cmd_sweep, "Un barrido a partir de un JSON de barrido.")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="Ruta del JSON de configuración.")
        p.add_argument("--out", required=True, help="Ruta del CSV de resultados.")
        p.add_argument("--seed", type=_seed, default=None, help="Sustituye la semilla del archivo.")
        p.add_argument("--workers", type=_positive_int, default=settings.workers)
        if name == "run":
            p.add_argument("--export-dir", default=None,
                           help="Directorio donde exportar nodos, clusters, rondas y traza de la repetición 0.")
        else:
            p.add_argument("--cap", type=_positive_int, default=settings.sweep_cap,
                           help="Máximo de puntos del barrido si el JSON no lo fija.")
        p.set_defaults(handler=handler)

    for name, handler, help_text in (("fig2", cmd_fig2, "Barrido predefinido: R frente a lambda por mecanismo."),
                                     ("fig3", cmd_fig3, "Barrido predefinido: G frente a p_fail por serie.")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=_seed, default=None)
        p.add_argument("--rcls-baseline", type=float, default=0.5,
                       help="r_cls de referencia (fig2: todos; fig3: PoS y PoC).")
        p.add_argument("--workers", type=_positive_int, default=settings.workers)
        p.add_argument("--repetitions", type=_positive_int, default=20)
        p.add_argument("--rounds", type=_positive_int, default=1000)
        p.set_defaults(handler=handler)

    p = sub.add_parser("gini", help="Coeficiente de Gini de una lista de participaciones.")
    p.add_argument("--counts", type=_counts, required=True, help="Enteros separados por comas.")
    p.set_defaults(handler=cmd_gini)

    p = sub.add_parser("usl", help="Curva de la ley universal de escalabilidad.")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n-max", type=_positive_int, required=True)
    p.set_defaults(handler=cmd_usl)
    return parser


def main(argv=None) -> int:
    settings = load_settings()
    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except (ConfigError, SweepCapError) as exc:
        print(f"Error de configuración: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"Error en los argumentos: {exc}", file=sys.stderr)
        return 2
    except ResultsWriteError as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
