"""Standalone entry point: run an export job file.

Usage: chiralis-export job.json [--backend mock|diffusion] [--out DIR]
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .backends import BackendUnavailable
from .export import export_features
from .formats import FormatError
from .job import JobError, load_job


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chiralis-export",
        description="Render views, extract image-model features, and write "
                    "feature containers for the chiralis pipeline.")
    parser.add_argument("job", help="JSON job file")
    parser.add_argument("--backend", choices=["mock", "diffusion"],
                        help="override the job's backend")
    parser.add_argument("--out", help="override the job's output directory")
    args = parser.parse_args(argv)

    try:
        job = load_job(args.job)
        if args.backend:
            job = dataclasses.replace(job, backend=args.backend)
        if args.out:
            job = dataclasses.replace(job, output_dir=Path(args.out))
        result = export_features(job)
    except (JobError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BackendUnavailable as exc:
        print(f"backend unavailable: {exc}", file=sys.stderr)
        return 3
    print(f"exported {result.n_views} views x {result.total_channels} "
          f"channels -> {result.original.parent}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
