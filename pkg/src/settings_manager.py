"""Settings management with an INI file of run defaults."""

import configparser
from pathlib import Path

from rich.console import Console

console = Console(stderr=True)

SETTINGS_FILE = Path(__file__).parent.parent / "settings.ini"

DEFAULT_SETTINGS = {
    "Simulation": {
        "n": "10000",
        "delta": "0.0",
        "m": "5",
        "seed": "1",
    },
    "Estimation": {
        "bracket_lower": "-0.99",
        "bracket_upper": "25.0",
        "tol": "1e-8",
        "alpha": "0.05",
    },
    "MonteCarlo": {
        "replicates": "100",
        "workers": "1",
        "histogram_bins": "fd",
    },
    "Limits": {
        "tail_tol": "1e-12",
    },
    "Output": {
        "out_dir": "runs",
        "logs_dir": "logs",
    },
}


class SettingsManager:
    """Manage run defaults from an INI file."""

    def __init__(self, settings_path: Path | None = None):
        self.config = configparser.ConfigParser()
        self.settings_path = Path(settings_path) if settings_path else SETTINGS_FILE

    def load(self) -> dict:
        """Load settings from the INI file, writing the defaults first if it is missing."""
        if not self.settings_path.exists():
            console.print(
                f"[yellow]{self.settings_path.name} not found. Writing defaults...[/yellow]"
            )
            self._save_settings(DEFAULT_SETTINGS)
            console.print(f"[dim]Settings saved to: {self.settings_path}[/dim]\n")

        self.config.read_dict(DEFAULT_SETTINGS)
        self.config.read(self.settings_path)
        return self._parse_config()

    def _parse_config(self) -> dict:
        """Parse INI config into settings dictionary."""
        try:
            settings = {
                "n": self.config.getint("Simulation", "n"),
                "delta": self.config.getfloat("Simulation", "delta"),
                "m": self.config.getint("Simulation", "m"),
                "seed": self.config.getint("Simulation", "seed"),
                "bracket_lower": self.config.getfloat("Estimation", "bracket_lower"),
                "bracket_upper": self.config.getfloat("Estimation", "bracket_upper"),
                "tol": self.config.getfloat("Estimation", "tol"),
                "alpha": self.config.getfloat("Estimation", "alpha"),
                "replicates": self.config.getint("MonteCarlo", "replicates"),
                "workers": self.config.getint("MonteCarlo", "workers"),
                "histogram_bins": parse_bins(self.config.get("MonteCarlo", "histogram_bins")),
                "tail_tol": self.config.getfloat("Limits", "tail_tol"),
                "out_dir": self.config.get("Output", "out_dir"),
                "logs_dir": self.config.get("Output", "logs_dir"),
            }
        except ValueError as e:
            raise ValueError(f"{self.settings_path.name}: {e}") from e

        self._validate_settings(settings)
        return settings

    def _validate_settings(self, settings: dict) -> None:
        """Validate settings values."""
        if settings["n"] < 2:
            raise ValueError("n must be at least 2")

        if settings["delta"] <= -1:
            raise ValueError("delta must be greater than -1")

        if settings["m"] < 1:
            raise ValueError("m must be at least 1")

        if settings["seed"] < 0:
            raise ValueError("seed must be non-negative")

        if not -1 < settings["bracket_lower"] < settings["bracket_upper"]:
            raise ValueError("bracket_lower/bracket_upper must satisfy -1 < lower < upper")

        if settings["tol"] <= 0:
            raise ValueError("tol must be positive")

        if not 0 < settings["alpha"] < 1:
            raise ValueError("alpha must be between 0 and 1")

        if settings["replicates"] < 1:
            raise ValueError("replicates must be at least 1")

        if settings["workers"] < 1:
            raise ValueError("workers must be at least 1")

        if not 0 < settings["tail_tol"] < 1:
            raise ValueError("tail_tol must be between 0 and 1")

    def _save_settings(self, sections: dict[str, dict[str, str]]) -> None:
        """Save settings to INI file."""
        config = configparser.ConfigParser()
        for name, values in sections.items():
            config[name] = dict(values)

        self.settings_path.parent.mkdir(parents=True, exist_ok=True)
        with self.settings_path.open("w") as f:
            config.write(f)


def parse_bins(value: str | int) -> str | int:
    """Histogram binning: a numpy rule name such as 'fd' or a positive bin count."""
    text = str(value).strip().lower()
    if text.isdigit():
        if int(text) < 1:
            raise ValueError("histogram_bins must be a rule name or a positive integer")
        return int(text)
    if text not in ("fd", "auto", "sturges", "scott", "doane", "rice", "sqrt", "stone"):
        raise ValueError(f"Unknown histogram_bins rule '{value}'")
    return text


def load_settings(settings_path: Path | None = None) -> dict:
    """Load settings from INI file (create if needed)."""
    manager = SettingsManager(settings_path)
    return manager.load()
