from typing import Any, Iterable, List, Optional, Sequence
import logging
import sys
import pandas as pd
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.traceback import install

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Create a global console instance
try:
    console = Console(stderr=True)
    logger.debug("Console initialized successfully")
except Exception as e:
    logger.error(f"Failed to initialize Rich console: {str(e)}")

    class FallbackConsole:
        def print(self, *args, **kwargs):
            try:
                print(*args, file=sys.stderr)
            except Exception as e:
                logger.error(f"Fallback print failed: {str(e)}")
    console = FallbackConsole()


def configure_logging(level: str = "INFO") -> None:
    """Configure root logging and rich tracebacks once per process."""
    install(console=console if isinstance(console, Console) else None)
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.INFO))


def format_cell(value: Any, digits: int = 6) -> str:
    """Render a table cell; undefined statistics show as a dash."""
    if value is None:
        return "-"
    if isinstance(value, float):
        if value != value:
            return "-"
        return f"{value:.{digits}g}"
    return str(value)


def print_table(title: str, columns: Sequence[str], rows: Iterable[Sequence[Any]], limit: Optional[int] = None):
    """Print rows as a rich table."""
    try:
        table = Table(title=title, show_lines=False)
        for column in columns:
            table.add_column(str(column))
        for i, row in enumerate(rows):
            if limit is not None and i >= limit:
                break
            table.add_row(*[format_cell(v) for v in row])
        console.print(table)
    except Exception as e:
        logger.error(f"Error printing table {title}: {str(e)}")


def print_frame(title: str, frame: pd.DataFrame, limit: Optional[int] = None):
    """Print a DataFrame as a rich table, index included when it is named."""
    if frame.index.name is not None:
        frame = frame.reset_index()
    rows: List[Sequence[Any]] = [list(r) for r in frame.itertuples(index=False)]
    print_table(title, list(frame.columns), rows, limit=limit)


def print_summary(title: str, content: str, ok: bool = True):
    """Print a bordered summary panel."""
    try:
        console.print(Panel(content, title=title, border_style="green" if ok else "yellow"))
    except Exception as e:
        logger.error(f"Failed to print panel: {str(e)}")
        print(f"\n{title}:\n{content}", file=sys.stderr)


def print_error(message: str):
    """Print an error message."""
    try:
        console.print(f"[bold red]Error:[/bold red] {message}")
        logger.error(message)
    except Exception as e:
        logger.error(f"Rich console error display failed: {str(e)}")
        print(f"ERROR: {message}", file=sys.stderr)


def print_warning(message: str):
    """Print a warning message."""
    try:
        console.print(f"[bold yellow]Warning:[/bold yellow] {message}")
        logger.warning(message)
    except Exception as e:
        logger.error(f"Rich console warning display failed: {str(e)}")
        print(f"WARNING: {message}", file=sys.stderr)


def print_success(message: str):
    """Print a success message."""
    try:
        console.print(f"[bold green]Success:[/bold green] {message}")
        logger.info(f"Success: {message}")
    except Exception as e:
        logger.error(f"Rich console success display failed: {str(e)}")
        print(f"SUCCESS: {message}", file=sys.stderr)
