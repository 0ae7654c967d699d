#!/usr/bin/env python3
"""Dump fixture binary XML and DEX files with androguard as a reference.

Writes `<name>.ref.json` next to every `fixtures/axml/*.axml` and
`fixtures/dex/*.dex`. The Rust oracle tests compare the analyzer's decoders
against these frozen dumps, so androguard is needed only to regenerate them:

    python3 -m venv /tmp/ag && /tmp/ag/bin/pip install androguard
    /tmp/ag/bin/python tools/reference_dump.py
"""

import json
import pathlib
import sys

from loguru import logger

logger.remove()

from androguard.core import axml, dex  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def dump_axml(raw):
    parser = axml.AXMLParser(raw)
    if not parser.is_valid():
        raise SystemExit("androguard rejected document")
    elements, attributes, stack = [], [], []
    while True:
        event = next(parser)
        if event == axml.START_TAG:
            index = len(elements)
            elements.append({
                "index": index,
                "parent": stack[-1] if stack else None,
                "namespace": parser.namespace or None,
                "name": parser.name,
            })
            for i in range(parser.getAttributeCount()):
                value_type = parser.getAttributeValueType(i)
                if value_type == 0x03:
                    value = parser.getAttributeValue(i)
                else:
                    value = parser.getAttributeValueData(i) & 0xFFFFFFFF
                attributes.append({
                    "element": index,
                    "namespace": parser.getAttributeNamespace(i) or None,
                    "name": parser.getAttributeName(i),
                    "type": value_type,
                    "value": value,
                })
            stack.append(index)
        elif event == axml.END_TAG:
            stack.pop()
        elif event == axml.END_DOCUMENT:
            break
    if parser.packerwarning:
        raise SystemExit("attribute name disagrees with its framework resource id")
    return {"tool": "androguard", "elements": elements, "attributes": attributes}


def to_code_points(s):
    # androguard keeps lone surrogates from modified UTF-8; join pairs so the
    # dump holds proper code points.
    return s.encode("utf-16", "surrogatepass").decode("utf-16")


def dump_dex(raw):
    d = dex.DEX(raw)
    strings = [to_code_points(s) for s in d.get_strings()]
    return {"tool": "androguard", "version": raw[4:7].decode(), "strings": strings}


def main():
    for path in sorted((ROOT / "axml").glob("*.axml")):
        out = path.with_suffix(".ref.json")
        out.write_text(json.dumps(dump_axml(path.read_bytes()), indent=1, ensure_ascii=False) + "\n")
        print("wrote", out)
    for path in sorted((ROOT / "dex").glob("*.dex")):
        out = path.with_suffix(".ref.json")
        out.write_text(json.dumps(dump_dex(path.read_bytes()), indent=1, ensure_ascii=False) + "\n")
        print("wrote", out)


if __name__ == "__main__":
    sys.exit(main())
