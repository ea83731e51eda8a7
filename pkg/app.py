# ============================================================================
# app.py - mixbound command line: KL / entropy experiments, single-pair bounds, selftest
# ============================================================================
import logging
import os
import sys
from pathlib import Path

# Third-party
import click
import sentry_sdk
from dotenv import load_dotenv

# Environment setup, before local modules read it
load_dotenv()

# Local application
from core.config import load_config, preset
from core.errors import ConfigError, InvariantViolation, MixboundError
from core.reports import emit_csv, emit_plot
from core.selftest import run_checks
from core.services import ExperimentService
from core.utils import configure_logging

# Initialize Sentry for error monitoring
if os.getenv("SENTRY_DSN"):
    sentry_sdk.init(
        dsn=os.getenv("SENTRY_DSN"),
        traces_sample_rate=0.0,
        environment=os.getenv("MIXBOUND_ENVIRONMENT", "development"),
    )

logger = logging.getLogger("mixbound")

EXIT_VIOLATION, EXIT_IO = 1, 2
DEFAULT_PRESETS = {"kl": "paper-s4", "entropy": "entropy-gmm"}
BOUND_KINDS = ("kl", "reverse-kl", "jeffreys", "js", "entropy")


def _fail(message, code):
    click.echo(f"❌ {message}", err=True)
    sys.exit(code)


def _report_unexpected(exc):
    logger.error(f"❌ Unexpected error: {exc}", exc_info=True)
    if os.getenv("SENTRY_DSN"):
        sentry_sdk.capture_exception(exc)


def _resolve_config(config_path, preset_name, default_preset, seed, samples, reps, quad_tol):
    if config_path and preset_name:
        raise ConfigError("use either --config or --preset, not both", field="config")
    if config_path:
        cfg = load_config(config_path)
    elif preset_name or default_preset:
        cfg = preset(preset_name or default_preset)
    else:
        raise ConfigError("a configuration is required (--config or --preset)", field="config")
    return cfg.with_overrides(
        base_seed=seed,
        sample_sizes=samples or None,
        repetitions=reps,
        quad_tol=quad_tol,
    )


def config_options(fn):
    """Options shared by every command that reads an experiment configuration."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON experiment document."),
        click.option("--preset", "preset_name", help="Built-in configuration (paper-s4, entropy-gmm)."),
        click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), help="Base seed for every MC stream."),
        click.option("--samples", type=click.IntRange(min=1), multiple=True,
                     help="Sample size; repeat for several, e.g. --samples 100 --samples 1000."),
        click.option("--reps", type=click.IntRange(min=1), help="MC repetitions per sample size."),
        click.option("--quad-tol", type=click.FloatRange(min=0.0, min_open=True), help="Absolute quadrature tolerance."),
        click.option("--units", type=click.Choice(["nats", "bits"]), default="nats", show_default=True),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def output_options(fn):
    fn = click.option("--format", "fmt", type=click.Choice(["csv", "svg", "both"]), default="both",
                      show_default=True)(fn)
    fn = click.option("--out-dir", type=click.Path(file_okay=False), default="results", show_default=True)(fn)
    return fn


def _check_sizes(samples):
    if samples and any(b <= a for a, b in zip(samples, samples[1:])):
        raise ConfigError(f"sample sizes must be strictly increasing, got {list(samples)}", field="samples")


def _write(rows, out_dir, stem, fmt):
    out_dir = Path(out_dir)
    written = []
    if fmt in ("csv", "both"):
        written.append(emit_csv(rows, out_dir / f"{stem}.csv"))
    if fmt in ("svg", "both"):
        written.extend(emit_plot(rows, out_dir / f"{stem}_plots"))
    return written


def _run_experiment(kind, config_path, preset_name, seed, samples, reps, quad_tol, units, out_dir, fmt):
    try:
        _check_sizes(samples)
        cfg = _resolve_config(config_path, preset_name, DEFAULT_PRESETS[kind], seed, samples, reps, quad_tol)
        service = ExperimentService(cfg, units=units)
        rows = service.run_kl_experiment() if kind == "kl" else service.run_entropy_experiment()
        written = _write(rows, out_dir, kind, fmt)
    except ConfigError as exc:
        _fail(f"Invalid configuration: {exc}", EXIT_IO)
    except OSError as exc:
        _fail(f"Cannot write results: {exc}", EXIT_IO)
    except InvariantViolation as exc:
        _fail(str(exc), EXIT_VIOLATION)
    except MixboundError as exc:
        _report_unexpected(exc)
        _fail(str(exc), EXIT_VIOLATION)
    except Exception as exc:
        _report_unexpected(exc)
        _fail(f"Unexpected error: {exc}", EXIT_VIOLATION)

    for path in written:
        click.echo(str(path))
    problems = service.violations + service.quadrature_failures
    if problems:
        for message in problems:
            click.echo(f"❌ {message}", err=True)
        sys.exit(EXIT_VIOLATION)
    click.echo(f"✅ {len(rows)} rows, all bound invariants held")


@click.group()
@click.option("--log-level", default=None, help="Root log level (default MIXBOUND_LOG_LEVEL or WARNING).")
def cli(log_level):
    """Certified bounds on KL divergence, cross-entropy and entropy of univariate mixtures."""
    configure_logging(log_level)


@cli.command()
@config_options
@output_options
def kl(config_path, preset_name, seed, samples, reps, quad_tol, units, out_dir, fmt):
    """KL bounds in both directions for every configured pair, with MC estimates."""
    _run_experiment("kl", config_path, preset_name, seed, samples, reps, quad_tol, units, out_dir, fmt)


@cli.command()
@config_options
@output_options
def entropy(config_path, preset_name, seed, samples, reps, quad_tol, units, out_dir, fmt):
    """Entropy bounds and MEUB for every configured mixture, with MC estimates."""
    _run_experiment("entropy", config_path, preset_name, seed, samples, reps, quad_tol, units, out_dir, fmt)


@cli.command()
@config_options
@click.option("--kind", "kinds", type=click.Choice(BOUND_KINDS), multiple=True,
              help="Quantity to print; repeat for several (default: all).")
def bounds(config_path, preset_name, seed, samples, reps, quad_tol, units, kinds):
    """Print `kind lower upper slack` lines for the first configured pair."""
    try:
        cfg = _resolve_config(config_path, preset_name, None, seed, samples, reps, quad_tol)
        results = ExperimentService(cfg, units=units).pair_bounds()
    except ConfigError as exc:
        _fail(f"Invalid configuration: {exc}", EXIT_IO)
    except OSError as exc:
        _fail(str(exc), EXIT_IO)
    except MixboundError as exc:
        _report_unexpected(exc)
        _fail(str(exc), EXIT_VIOLATION)
    except Exception as exc:
        _report_unexpected(exc)
        _fail(f"Unexpected error: {exc}", EXIT_VIOLATION)
    for kind, interval in results:
        if not kinds or kind in kinds:
            click.echo(f"{kind} {interval.lower:.12g} {interval.upper:.12g} {interval.quadrature_slack:.12g}")


@cli.command()
def selftest():
    """Run the invariant suite; exit 1 if any check fails."""
    if not run_checks(echo=click.echo):
        sys.exit(EXIT_VIOLATION)


if __name__ == "__main__":
    cli()
