"""
Command Line Interface
----------------------
Typer application wiring the library into reproducible runs. Every command
builds a RunConfig from its flags, executes it, writes CSV/JSON outputs plus
a manifest into the output directory and prints a JSON summary on stdout.
`bilqctrl run <config.yaml|manifest.json>` replays a stored configuration.

Exit codes: 0 success, 1 validation or usage error, 2 I/O error.
"""

import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np
import pandas as pd
import structlog
import typer

from .config import RunConfig, build_config, load_run_config
from .costs import (
    build_cost_report,
    c1_bracket,
    c1_chain_upper_bound,
    c1_upper_sweep,
    duty_cost_formula,
    lr_scaling_report,
    symmetric_costs,
    verify_fidelity_cap,
)
from .exceptions import BilqctrlError, ValidationError
from .linalg import basis_vector
from .logs import configure_logging
from .propagation import (
    discretization_convergence,
    discretize_pulse,
    galerkin_compare,
    load_control,
    norm_growth,
    propagate,
    time_reversal_check,
)
from .reporting import RunJournal, dumps
from .synthesis import find_optimal_time, rwa_pulse
from .system import MOLECULE_PREFIX, GalerkinSystem, build_molecule, resolve_system, save_system
from .transitions import chain_of_connectedness, resonance_set, transition_table

logger = structlog.get_logger(__name__)

app = typer.Typer(
    name="bilqctrl",
    help="Bilinear quantum control: propagation, RWA pulses and L^p cost bounds.",
    add_completion=False,
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)


# --- Flag parsing ---

def parse_pair(text: str) -> Tuple[int, int]:
    try:
        j, k = (int(part) for part in text.split(","))
    except ValueError as e:
        raise typer.BadParameter(f"expected 'j,k', got '{text}'") from e
    return j, k


def parse_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise typer.BadParameter(f"expected comma-separated numbers, got '{text}'") from e


def parse_ints(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise typer.BadParameter(f"expected comma-separated integers, got '{text}'") from e


def _system(config: RunConfig) -> GalerkinSystem:
    levels = config.params.get("levels")
    if levels is None:
        return resolve_system(config.system)
    if config.system.startswith(MOLECULE_PREFIX):
        return build_molecule(int(levels))
    return resolve_system(config.system).truncate(int(levels))


def format_matrix(m: np.ndarray) -> str:
    """Rows of complex entries, 12 significant digits."""
    def entry(z: complex) -> str:
        return f"{z.real:.12g}{z.imag:+.12g}j"
    cells = [[entry(z) for z in row] for row in m]
    width = max(len(c) for row in cells for c in row)
    return "\n".join("  ".join(c.rjust(width) for c in row) for row in cells)


# --- Subcommand implementations ---

def run_model(config: RunConfig, journal: RunJournal) -> Optional[Dict[str, Any]]:
    system = _system(config)
    save_system(system, journal.output_dir / "system.json")
    journal.mark("system.json")
    if config.params.get("print", False):
        typer.echo(f"A^({system.n_levels}) =\n{format_matrix(system.a_matrix())}")
        typer.echo(f"B^({system.n_levels}) =\n{format_matrix(system.coupling)}")
        return None
    return {"label": system.label, "n_levels": system.n_levels,
            "spectrum": system.spectrum.tolist()}


def run_propagate(config: RunConfig, journal: RunJournal) -> Dict[str, Any]:
    params = config.params
    system = _system(config)
    if params.get("control"):
        control = load_control(params["control"])
    else:
        j, k = params.get("pair", (1, 2))
        pulse = rwa_pulse(system, j, k, params.get("shape", "cosine"), eta=params.get("eta"),
                          amplitude=params.get("amplitude", 1.0))
        pulse = pulse.scaled(1.0 / params.get("n", 1))
        control = discretize_pulse(pulse, params.get("duration", 10.0),
                                   config.numerics.steps_per_period)

    initial = params.get("initial", 1)
    psi0 = basis_vector(system.n_levels, initial)
    times = np.linspace(0.0, control.duration, params.get("samples", 201))
    trajectory = propagate(system, control, psi0, times)
    journal.write_csv(trajectory.to_frame(system), "trajectory.csv", "trajectory")

    norm_defect = trajectory.max_norm_defect()
    if norm_defect > config.numerics.norm_tol:
        raise ValidationError(
            f"norm preservation violated: defect {norm_defect:.3e} > tol {config.numerics.norm_tol:.0e}"
        )
    report = build_cost_report(system, control, j=initial,
                               k=params.get("target", 2 if initial == 1 else 1),
                               control_id="propagate", tolerance=config.numerics.bound_tol)
    summary = {
        "duration": control.duration,
        "pieces": control.n_pieces,
        "final_populations": trajectory.final_state.populations.tolist(),
        "norm_defect": norm_defect,
        "time_reversal_defect": time_reversal_check(system, control),
        "norm_growth_s1": norm_growth(system, control, psi0, 1.0, times),
        "cost_report": report.to_dict(),
    }
    journal.write_json(summary, "propagate.json")
    return summary


def run_transitions(config: RunConfig, journal: RunJournal) -> Dict[str, Any]:
    system = _system(config)
    gap_tol = config.numerics.gap_tol
    records = transition_table(system, gap_tol)
    resonances = {
        f"{r.pair[0]},{r.pair[1]}": resonance_set(system, *r.pair, gap_tol).to_dict()["pairs"]
        for r in records if r.nondegenerate and r.gap > 0
    }
    payload = {
        "system": system.label,
        "transitions": [r.to_dict() for r in records],
        "resonance_sets": resonances,
        "chain": chain_of_connectedness(system, gap_tol).to_dict(),
    }
    journal.write_json(payload, "transitions.json")
    return payload


def run_synthesize(config: RunConfig, journal: RunJournal) -> Dict[str, Any]:
    params = config.params
    numerics = config.numerics
    system = _system(config)
    j, k = params.get("pair", (1, 2))
    pulse = rwa_pulse(system, j, k, params.get("shape", "cosine"), eta=params.get("eta"))
    schedule = find_optimal_time(system, j, k, pulse, params.get("n", 24),
                                 numerics.steps_per_period, numerics.scan_points, numerics.gap_tol)
    payload = schedule.to_dict()
    journal.write_json(payload, "schedule.json")
    if params.get("scan_csv", False):
        journal.write_csv(schedule.scan, "scan.csv", "scan")
    return payload


def run_cost_sweep(config: RunConfig, journal: RunJournal) -> Dict[str, Any]:
    params = config.params
    numerics = config.numerics
    system = _system(config)
    pair = tuple(params.get("pair", (1, 2)))

    sweep = c1_upper_sweep(system, params.get("etas", [0.4, 0.2, 0.1]),
                           params.get("target_fidelity", 0.99), max_n=numerics.max_n,
                           min_n=numerics.min_n, pair=pair,
                           steps_per_period=numerics.steps_per_period,
                           scan_points=numerics.scan_points)
    sweep["cost_formula"] = [duty_cost_formula(eta) for eta in sweep["eta"]]
    journal.write_csv(sweep, "c1_sweep.csv", "c1-sweep")

    verifications = [
        verify_fidelity_cap(system, params.get("trials", 200), budget, config.seed,
                            tolerance=numerics.bound_tol)
        for budget in params.get("budgets", [2.0, 3.0])
    ]
    strongest = max(verifications, key=lambda v: v.l1_budget, default=None)
    all_passed = all(v.passed for v in verifications)
    bracket = c1_bracket(sweep, strongest if all_passed else None)
    chain = c1_chain_upper_bound(system, *pair, numerics.gap_tol)
    symmetry = symmetric_costs(system, *pair, params.get("symmetry_n", numerics.min_n),
                               steps_per_period=numerics.steps_per_period,
                               scan_points=numerics.scan_points)
    journal.write_csv(symmetry, "symmetry.csv", "symmetry")

    lr_pulse = rwa_pulse(system, *pair, "duty", eta=params.get("lr_eta", 0.1))
    tables = [
        lr_scaling_report(system, *pair, lr_pulse, r, params.get("n_list", [4, 8, 16, 32]),
                          numerics.steps_per_period, numerics.scan_points)
        for r in params.get("r_values", [2.0])
    ]
    if tables:
        journal.write_csv(pd.concat(tables, ignore_index=True), "lr_scaling.csv", "lr-scaling")

    summary = {
        "c1_bracket": bracket,
        "chain_upper_bound": chain.to_dict(),
        "symmetry_gap": float(symmetry["relative_gap"].iloc[0]),
        "fidelity_cap": [v.to_dict() for v in verifications],
        "sweep_reached": bool(sweep["reached"].all()),
        "lr_within_bound": bool(all(t["within_bound"].all() for t in tables)),
    }
    journal.write_json(summary, "cost_summary.json")
    return summary


def run_convergence(config: RunConfig, journal: RunJournal) -> Dict[str, Any]:
    params = config.params
    numerics = config.numerics
    small = _system(config)
    large = resolve_system(params.get("large_system", "molecule:14"))
    j, k = params.get("pair", (1, 2))
    samples = params.get("samples", 201)

    pulse = rwa_pulse(small, j, k, params.get("shape", "duty"), eta=params.get("eta", 0.1))
    schedule = find_optimal_time(small, j, k, pulse, params.get("n", 16),
                                 numerics.steps_per_period, numerics.scan_points, numerics.gap_tol)
    control = schedule.control
    psi0 = basis_vector(small.n_levels, j)
    deviation = galerkin_compare(small, large, control, psi0,
                                 np.linspace(0.0, control.duration, samples))
    padded = control.zero_padded(params.get("pad_factor", 5.0) * control.duration)
    padded_deviation = galerkin_compare(small, large, padded, psi0,
                                        np.linspace(0.0, padded.duration, samples))

    cosine = rwa_pulse(small, j, k, "cosine")
    table = discretization_convergence(
        small, cosine, params.get("periods", 5) * cosine.period, psi0,
        params.get("resolutions", [16, 32, 64]), numerics.oracle_steps,
    )
    journal.write_csv(table, "discretization.csv", "discretization")

    errors = table["endpoint_error"].to_numpy()
    summary = {
        "small": small.label,
        "large": large.label,
        "l1_cost": schedule.l1_cost,
        "galerkin_deviation": deviation,
        "galerkin_deviation_padded": padded_deviation,
        "discretization_decreasing": bool(np.all(np.diff(errors) < 0)),
    }
    journal.write_json(summary, "convergence.json")
    return summary


RUNNERS: Dict[str, Callable[[RunConfig, RunJournal], Optional[Dict[str, Any]]]] = {
    "model": run_model,
    "propagate": run_propagate,
    "transitions": run_transitions,
    "synthesize": run_synthesize,
    "cost-sweep": run_cost_sweep,
    "convergence": run_convergence,
}


def execute(config: RunConfig) -> Optional[Dict[str, Any]]:
    """Run one configuration, write its manifest and print the summary."""
    journal = RunJournal(config)
    logger.info("run_start", subcommand=config.subcommand, system=config.system,
                output_dir=str(journal.output_dir))
    summary = RUNNERS[config.subcommand](config, journal)
    journal.write_manifest()
    if summary is not None:
        typer.echo(dumps(summary), nl=False)
    return summary


def _numerics(**overrides: Any) -> Dict[str, Any]:
    return {key: value for key, value in overrides.items() if value is not None}


def _run(subcommand: str, system: str, output_dir: str, seed: int,
         numerics: Dict[str, Any], params: Dict[str, Any]) -> None:
    config = build_config({
        "subcommand": subcommand,
        "system": system,
        "output_dir": output_dir,
        "seed": seed,
        "numerics": numerics,
        "params": params,
    })
    execute(config)


# --- Commands ---

SYSTEM_OPTION = typer.Option("molecule:10", "--system", help="'molecule:N' or a system file")
OUTPUT_OPTION = typer.Option("results", "--output-dir", "-o", help="Directory for outputs")
SEED_OPTION = typer.Option(42, "--seed", help="Random seed recorded in the manifest")


@app.callback()
def callback(
    log_level: str = typer.Option("WARNING", "--log-level", help="DEBUG, INFO, WARNING, ..."),
    json_logs: bool = typer.Option(False, "--json-logs", help="Log JSON lines to stderr"),
):
    """Configure logging for every subcommand."""
    try:
        configure_logging(log_level, json_logs)
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--log-level") from e


@app.command()
def model(
    system: str = SYSTEM_OPTION,
    levels: Optional[int] = typer.Option(None, "--levels", help="Truncation order N"),
    print_matrices: bool = typer.Option(False, "--print", help="Print A^(N) and B^(N)"),
    output_dir: str = OUTPUT_OPTION,
):
    """Build a system, save its file and optionally print its matrices."""
    _run("model", system, output_dir, 0, {}, {"levels": levels, "print": print_matrices})


@app.command("propagate")
def propagate_command(
    system: str = SYSTEM_OPTION,
    control: Optional[str] = typer.Option(None, "--control", help="Control file (JSON)"),
    pair: str = typer.Option("1,2", "--pair", help="Transition j,k setting the pulse period"),
    shape: str = typer.Option("cosine", "--shape", help="cosine | duty | constant"),
    eta: Optional[float] = typer.Option(None, "--eta", help="Duty on-time"),
    amplitude: float = typer.Option(1.0, "--amplitude"),
    n: int = typer.Option(1, "--n", help="Amplitude divisor"),
    duration: float = typer.Option(10.0, "--duration"),
    initial: int = typer.Option(1, "--initial", help="Initial eigenstate index"),
    samples: int = typer.Option(201, "--samples"),
    steps_per_period: Optional[int] = typer.Option(None, "--steps-per-period"),
    output_dir: str = OUTPUT_OPTION,
):
    """Propagate an eigenstate and export the trajectory."""
    _run("propagate", system, output_dir, 0, _numerics(steps_per_period=steps_per_period), {
        "control": control, "pair": list(parse_pair(pair)), "shape": shape, "eta": eta,
        "amplitude": amplitude, "n": n, "duration": duration, "initial": initial,
        "samples": samples,
    })


@app.command()
def transitions(
    system: str = SYSTEM_OPTION,
    levels: Optional[int] = typer.Option(None, "--levels"),
    gap_tol: Optional[float] = typer.Option(None, "--gap-tol"),
    output_dir: str = OUTPUT_OPTION,
):
    """List transitions, resonance sets and the chain of connectedness."""
    _run("transitions", system, output_dir, 0, _numerics(gap_tol=gap_tol), {"levels": levels})


@app.command()
def synthesize(
    system: str = SYSTEM_OPTION,
    pair: str = typer.Option("1,2", "--pair"),
    shape: str = typer.Option("cosine", "--shape", help="cosine | duty"),
    eta: Optional[float] = typer.Option(None, "--eta"),
    n: int = typer.Option(24, "--n"),
    levels: Optional[int] = typer.Option(None, "--levels"),
    steps_per_period: Optional[int] = typer.Option(None, "--steps-per-period"),
    scan_points: Optional[int] = typer.Option(None, "--scan-points"),
    scan_csv: bool = typer.Option(False, "--scan-csv", help="Also write the fidelity scan"),
    output_dir: str = OUTPUT_OPTION,
):
    """Find T*_n and the fidelity of the RWA pulse u*/n."""
    _run("synthesize", system, output_dir, 0,
         _numerics(steps_per_period=steps_per_period, scan_points=scan_points), {
             "pair": list(parse_pair(pair)), "shape": shape, "eta": eta, "n": n,
             "levels": levels, "scan_csv": scan_csv,
         })


@app.command("cost-sweep")
def cost_sweep(
    system: str = SYSTEM_OPTION,
    pair: str = typer.Option("1,2", "--pair"),
    etas: str = typer.Option("0.4,0.2,0.1", "--etas"),
    target_fidelity: float = typer.Option(0.99, "--target-fidelity"),
    min_n: Optional[int] = typer.Option(None, "--min-n"),
    max_n: Optional[int] = typer.Option(None, "--max-n"),
    r_values: str = typer.Option("2", "--r-values"),
    n_list: str = typer.Option("4,8,16,32", "--n-list"),
    lr_eta: float = typer.Option(0.1, "--lr-eta"),
    trials: int = typer.Option(200, "--trials"),
    budgets: str = typer.Option("2.0,3.0", "--budgets", help="L1 budgets (< pi) of the cap check"),
    symmetry_n: Optional[int] = typer.Option(None, "--symmetry-n",
                                             help="n of the reversed-transfer check"),
    seed: int = SEED_OPTION,
    output_dir: str = OUTPUT_OPTION,
):
    """Bracket C1 with duty-pulse sweeps and random-control caps; L^r scaling."""
    _run("cost-sweep", system, output_dir, seed, _numerics(min_n=min_n, max_n=max_n), {
        "pair": list(parse_pair(pair)), "etas": parse_floats(etas),
        "target_fidelity": target_fidelity, "r_values": parse_floats(r_values),
        "n_list": parse_ints(n_list), "lr_eta": lr_eta, "trials": trials,
        "budgets": parse_floats(budgets),
        **({"symmetry_n": symmetry_n} if symmetry_n is not None else {}),
    })


@app.command()
def convergence(
    system: str = typer.Option("molecule:8", "--system"),
    large_system: str = typer.Option("molecule:14", "--large-system"),
    pair: str = typer.Option("1,2", "--pair"),
    eta: float = typer.Option(0.1, "--eta"),
    n: int = typer.Option(16, "--n"),
    pad_factor: float = typer.Option(5.0, "--pad-factor"),
    resolutions: str = typer.Option("16,32,64", "--resolutions"),
    oracle_steps: Optional[int] = typer.Option(None, "--oracle-steps"),
    output_dir: str = OUTPUT_OPTION,
):
    """Galerkin stability between truncations and pulse discretization convergence."""
    _run("convergence", system, output_dir, 0, _numerics(oracle_steps=oracle_steps), {
        "large_system": large_system, "pair": list(parse_pair(pair)), "shape": "duty",
        "eta": eta, "n": n, "pad_factor": pad_factor, "resolutions": parse_ints(resolutions),
    })


@app.command("run")
def run_command(
    path: str = typer.Argument(..., help="YAML run config or manifest.json"),
    output_dir: Optional[str] = typer.Option(None, "--output-dir", "-o",
                                             help="Override the stored output directory"),
):
    """Execute a stored run configuration."""
    config = load_run_config(path)
    if output_dir is not None:
        config = config.model_copy(update={"output_dir": output_dir})
    execute(config)


def _is_click_failure(error: Exception) -> bool:
    """Usage errors and aborts from any click build, typer's vendored copy included."""
    if isinstance(error, (click.ClickException, click.exceptions.Abort)):
        return True
    for cls in type(error).__mro__:
        if cls.__name__ == "Abort":
            return True
        if cls.__name__ == "ClickException" and callable(getattr(error, "show", None)):
            return True
    return False


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map failures to exit codes."""
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        result = app(args=args, prog_name="bilqctrl", standalone_mode=False)
    except BilqctrlError as e:
        typer.echo(f"error: {e}", err=True)
        return 1
    except OSError as e:
        typer.echo(f"error: {e}", err=True)
        return 2
    except Exception as e:
        if not _is_click_failure(e):
            raise
        if callable(getattr(e, "show", None)):
            e.show()
        return 1
    return result if isinstance(result, int) else 0


def entrypoint() -> None:
    sys.exit(main())
