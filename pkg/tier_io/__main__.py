import logging
import sys

import fire
from rich.logging import RichHandler

from tier_io._console import console
from tier_io._toolkit import Toolkit
from tier_io.errors import ToolkitError


def main():
    logging.basicConfig(
        level=logging.WARNING,
        format='%(message)s',
        handlers=[RichHandler(console=console, show_path=False)],
    )
    try:
        fire.Fire(Toolkit, name='tier-io')
    except ToolkitError as e:
        console.print(f'error: {e}', style='red', markup=False, highlight=False)
        sys.exit(e.exit_code)
    except KeyboardInterrupt:
        sys.exit(0)


if __name__ == '__main__':
    main()
