from rich.console import Console
from datetime import datetime
import logging
from typing import Dict

logger = logging.getLogger(__name__)


class Printer:
    """Step tracker for multi-stage subcommands."""

    def __init__(self, console: Console):
        self.console = console
        self.items: Dict[str, dict] = {}
        logger.debug("Printer initialized")

    def _format_timestamp(self) -> str:
        return f"[dim]{datetime.now().strftime('%H:%M:%S')}[/dim]"

    def update_item(self, key: str, content: str, is_done: bool = False, hide_checkmark: bool = False):
        """Update or add a step line."""
        if not key or not content:
            logger.warning(f"Empty key or content in update_item: key='{key}', content='{content}'")
            return

        if "error" in key.lower():
            formatted_content = f"[bold red]{content}[/bold red]"
        elif "warning" in key.lower():
            formatted_content = f"[bold yellow]{content}[/bold yellow]"
        elif is_done:
            formatted_content = f"[bold green]{content}[/bold green]"
        else:
            formatted_content = content

        status = "+" if is_done else ">"
        if hide_checkmark:
            status = " "
        display_text = f"{self._format_timestamp()} {status} {formatted_content}"
        self.items[key] = {"content": display_text, "raw_content": content, "is_done": is_done}
        try:
            self.console.print(display_text)
        except Exception as e:
            logger.error(f"Error printing step {key}: {str(e)}")

    def mark_item_done(self, key: str):
        """Mark a step as finished, keeping its text."""
        if key not in self.items:
            logger.warning(f"Cannot mark unknown step {key} as done")
            return
        self.update_item(key, self.items[key]["raw_content"], is_done=True)
