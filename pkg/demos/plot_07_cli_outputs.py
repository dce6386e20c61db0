"""
Command-line sweeps and output files
====================================

The ``bftqcd`` command reads a flat TOML file and writes ``curves.csv``,
``config.echo`` and SVG plots. The same run twice gives byte-identical files.
"""

import filecmp
import tempfile
from pathlib import Path

from bftqcd.cli import main

config = Path(__file__).resolve().parent.parent / "configs" / "second_alarm.toml"
with tempfile.TemporaryDirectory() as tmp:
    for name in ("a", "b"):
        code = main(["sweep", str(config), "--trials", "200", "--out", str(Path(tmp) / name)])
        print("exit code", code)
    same = filecmp.cmp(Path(tmp) / "a" / "curves.csv", Path(tmp) / "b" / "curves.csv", shallow=False)
    print("curves.csv identical across runs:", same)
    print((Path(tmp) / "a" / "config.echo").read_text())
