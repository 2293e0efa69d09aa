from rich.console import Console

# Standard output carries report data only.
console = Console(stderr=True)
