"""``python -m mwgkernels`` runs the experiment CLI."""

from mwgkernels.cli import main

main()
