#!/usr/bin/env python3
"""
Preferential Attachment Lab

Simulation and likelihood-based estimation for affine preferential attachment
networks with random initial degrees.

Features:
- Fast seeded simulation with intermediate degree updating
- MLE from the full evolution or from the final snapshot (fixed initial degree)
- Quasi-MLE with a known initial degree law, and a log-log slope baseline
- Limiting degree law and asymptotic variance constants
- Parallel, reproducible Monte Carlo studies with CSV/JSON outputs
"""

import logging
import sys
from datetime import datetime
from pathlib import Path

# Add src directory to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from rich.console import Console
from rich.panel import Panel
from rich.text import Text

from cli import EXIT_VALIDATION, main as cli_main
from config import Config, version_stamp

console = Console(stderr=True)


def setup_logging(config: Config) -> str:
    """Configure logging for the application. Returns run_id."""
    run_id = datetime.now().strftime("%Y%m%d_%H%M%S")
    config.logging.logs_dir.mkdir(parents=True, exist_ok=True)
    log_file = config.logging.logs_dir / f"pa_run_{run_id}.log"

    detailed_formatter = logging.Formatter("%(asctime)s [%(levelname)s] %(name)s - %(message)s")

    # File handler only; the console shows rich panels, never raw records
    file_handler = logging.FileHandler(log_file, encoding="utf-8")
    file_handler.setLevel(config.logging.level)
    file_handler.setFormatter(detailed_formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    root_logger.addHandler(file_handler)

    # Suppress verbose third-party loggers
    logging.getLogger("numba").setLevel(logging.WARNING)

    return run_id


def main() -> int:
    """Main entry point."""
    try:
        config = Config.from_env()
    except ValueError as e:
        console.print(f"[bold red] Invalid configuration: {e}[/bold red]")
        return EXIT_VALIDATION

    run_id = setup_logging(config)
    logger = logging.getLogger(__name__)

    title = Text(f"Preferential Attachment Lab {version_stamp()}", style="bold cyan")
    console.print(Panel(title, border_style="cyan"))

    logger.info("=" * 80)
    logger.info(f"Run {run_id}: {' '.join(sys.argv[1:])}")
    logger.info("=" * 80)

    code = cli_main(sys.argv[1:], config)

    console.print(f"[dim]Log file: {config.logging.logs_dir / f'pa_run_{run_id}.log'}[/dim]")
    logger.info(f"Run {run_id} finished with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
