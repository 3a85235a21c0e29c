#!/usr/bin/env python3
"""Validate an evaluation report against schemas/eval_report.schema.json."""
import argparse
import json
import sys
from pathlib import Path

import jsonschema


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("report", type=Path)
    ap.add_argument("--schema", type=Path, default=Path(__file__).resolve().parent.parent / "schemas" / "eval_report.schema.json")
    args = ap.parse_args()
    schema = json.loads(args.schema.read_text())
    report = json.loads(args.report.read_text())
    try:
        jsonschema.validate(report, schema, cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError as e:
        print(f"{args.report}: invalid: {e.message} at {list(e.absolute_path)}", file=sys.stderr)
        return 1
    print(f"{args.report}: valid")
    return 0


if __name__ == "__main__":
    sys.exit(main())
