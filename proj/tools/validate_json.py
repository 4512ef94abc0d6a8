#!/usr/bin/env python3
"""Validate a JSON document (file or stdin) against a schema in docs/."""
import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource


def main() -> int:
    if len(sys.argv) not in (2, 3):
        print("usage: validate_json.py SCHEMA [INSTANCE]", file=sys.stderr)
        return 64
    schema_path = pathlib.Path(sys.argv[1])
    registry = Registry()
    for p in schema_path.parent.glob("*.schema.json"):
        doc = json.loads(p.read_text())
        registry = registry.with_resource(doc["$id"], Resource.from_contents(doc))
        registry = registry.with_resource(p.name, Resource.from_contents(doc))
    schema = json.loads(schema_path.read_text())
    text = pathlib.Path(sys.argv[2]).read_text() if len(sys.argv) == 3 else sys.stdin.read()
    validator = jsonschema.Draft202012Validator(schema, registry=registry)
    errors = sorted(validator.iter_errors(json.loads(text)), key=lambda e: list(e.path))
    for e in errors:
        print(f"{list(e.path)}: {e.message}", file=sys.stderr)
    if errors:
        return 1
    print("schema OK")
    return 0


if __name__ == "__main__":
    sys.exit(main())
