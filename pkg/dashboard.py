#!/usr/bin/env python3
"""Dashboard entry point for the verification suite.

Usage:
    python3 dashboard.py                          # Terminal mode, default corpus
    python3 dashboard.py --corpus majority:3,tribes:3:4 --paths 5000
    python3 dashboard.py --web                    # Browser mode (http://localhost:8000)
"""

import argparse
import logging
import shlex
from pathlib import Path

# Route all logging to file instead of stdout (would clutter TUI)
log_path = Path(__file__).parent / "dashboard.log"
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    filename=str(log_path),
    filemode="a",
    force=True,
)

import families
from tui.app import VerifyDashboard

logger = logging.getLogger(__name__)


def launch(corpus: str = "default", n_paths: int = 10000, web: bool = False,
           host: str = "localhost", port: int = 8000):
    specs = families.parse_corpus(corpus)
    if web:
        from textual_serve.server import Server
        script = Path(__file__).resolve()
        command = f"python3 {shlex.quote(str(script))} --corpus {shlex.quote(corpus)} --paths {n_paths}"
        server = Server(command, host=host, port=port)
        logger.info(f"Serving dashboard at http://{host}:{port}")
        print(f"Serving dashboard at http://{host}:{port}")
        server.serve()
    else:
        app = VerifyDashboard(corpus=specs, n_paths=n_paths)
        app.run()


def main():
    parser = argparse.ArgumentParser(description="Verification dashboard")
    parser.add_argument("--corpus", default="default")
    parser.add_argument("--paths", type=int, default=10000)
    parser.add_argument("--web", action="store_true")
    args = parser.parse_args()
    launch(corpus=args.corpus, n_paths=args.paths, web=args.web)


if __name__ == "__main__":
    main()
