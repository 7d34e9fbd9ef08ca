"""Build a small parallel English/Spanish corpus from translation catalogs.

Many Python web frameworks ship gettext catalogs inside their wheels.  The
English source strings (msgid) and the Spanish translations (msgstr) of the
``es`` catalogs make two same-domain corpora for the language-ID acceptance
test.  Wheels are fetched with ``pip download`` unless paths are given.

    python scripts/build_langid_corpora.py [--out data/corpora] [WHEEL ...]
"""

import argparse
import gettext
import html
import io
import re
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

DEFAULT_PACKAGES = ["pretix==2026.2.2", "django==5.2.18", "wagtail==8.0", "sphinx==8.1.3",
                    "django-allauth==65.19.7", "django-cms==5.1.3"]

TAG = re.compile(r"<[^>]+>")
PLACEHOLDER = re.compile(r"%\([^)]*\)[sdifr]|%[sdif]|\{[^{}]*\}")
WS = re.compile(r"\s+")


def clean(text):
    text = html.unescape(TAG.sub(" ", text))
    text = PLACEHOLDER.sub(" ", text)
    return WS.sub(" ", text).strip()


def pairs_from_wheel(path):
    with zipfile.ZipFile(path) as zf:
        for name in sorted(zf.namelist()):
            if not re.search(r"/locale/es/LC_MESSAGES/[^/]+\.mo$", name):
                continue
            catalog = gettext.GNUTranslations(io.BytesIO(zf.read(name)))._catalog
            for key in sorted(catalog, key=repr):
                value = catalog[key]
                if not isinstance(key, str) or not key or not value:
                    continue  # plural entries are keyed by tuples
                en, es = clean(key), clean(value)
                if en and es and en != es:
                    yield en, es


def download(packages, dest):
    cmd = [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:", "-d", str(dest)]
    subprocess.run(cmd + packages, check=True)
    return sorted(Path(dest).glob("*.whl"))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("wheels", nargs="*")
    ap.add_argument("--out", default="data/corpora")
    args = ap.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        wheels = [Path(w) for w in args.wheels] or download(DEFAULT_PACKAGES, tmp)
        seen, en_lines, es_lines = set(), [], []
        for wheel in sorted(wheels, key=lambda p: p.name):
            for en, es in pairs_from_wheel(wheel):
                if en in seen:
                    continue
                seen.add(en)
                en_lines.append(en)
                es_lines.append(es)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, lines in (("en.txt", en_lines), ("es.txt", es_lines)):
        data = ("\n".join(lines) + "\n").encode("utf-8")
        (out / name).write_bytes(data)
        print(f"{out / name}: {len(lines)} lines, {len(data)} bytes")


if __name__ == "__main__":
    main()
