#!/usr/bin/env python3
"""Regenerate the bundled transliteration and emoji tables.

Requires `Unidecode` and `emoji` from PyPI. Output files are written to
crates/core/data/ and are checked in; the build never runs this script.
"""
import pathlib
import unicodedata

import emoji
from unidecode import unidecode

DATA = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "data"

# Codepoints Unidecode leaves empty because its tables predate them.
DEVANAGARI_EXTRA = {
    0x0900: "n", 0x0904: "a", 0x093A: "oe", 0x093B: "ooe", 0x094E: "e",
    0x094F: "aw", 0x0955: "e", 0x0956: "ue", 0x0957: "uue", 0x0972: "a",
    0x0973: "oe", 0x0974: "ooe", 0x0975: "aw", 0x0976: "ue", 0x0977: "uue",
    0x0978: "dd", 0x0979: "zh", 0x097A: "y", 0x097B: "gg", 0x097C: "jj",
    0x097E: "ddd", 0x097F: "bb",
}
# Signs that legitimately romanize to nothing.
DEVANAGARI_EMPTY = {0x094D, 0x0971}


def devanagari():
    lines = ["# codepoint\treplacement (lowercased Unidecode romanization)"]
    for cp in range(0x0900, 0x0980):
        rep = unidecode(chr(cp))
        if not rep:
            rep = DEVANAGARI_EXTRA.get(cp)
            if rep is None and cp not in DEVANAGARI_EMPTY:
                continue
            rep = rep or ""
        rep = rep.lower()
        assert rep.isascii() and "\t" not in rep, (hex(cp), rep)
        lines.append(f"{cp:04X}\t{rep}")
    (DATA / "devanagari.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def emoji_names():
    rows = {}
    for glyph, info in emoji.EMOJI_DATA.items():
        if glyph[0].isascii():
            continue
        name = unidecode(info["en"]).lower()
        name = "".join(ch for ch in name if ch.isascii() and ch.isalnum())
        if name:
            rows[glyph] = name
    lines = ["# emoji\tname"]
    lines += [f"{g}\t{n}" for g, n in sorted(rows.items())]
    (DATA / "emoji.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    devanagari()
    emoji_names()
