"""CLI: read raw records, filter giveaway words, export a dataset."""

from __future__ import annotations

import argparse
import logging
import sys

from .backends import AssetsUnavailable, make_backend
from .export import ExportOptions, export
from .records import filter_dataset, read_records


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="congruity-export",
        description="Encode raw text+image records into a manifest+blob dataset")
    parser.add_argument("--records", required=True,
                        help="line-delimited JSON: {id, text, image, label, caption?, "
                             "attributes?, anps?}")
    parser.add_argument("--out", required=True, help="output file prefix")
    parser.add_argument("--knowledge", default="captions",
                        choices=["captions", "attributes", "anps", "none"])
    parser.add_argument("--image-encoder", default="vit", choices=["vit", "resnet"])
    parser.add_argument("--backend", default="auto",
                        choices=["auto", "hashed", "pretrained"])
    parser.add_argument("--no-filter", action="store_true",
                        help="keep records containing giveaway words")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        records = read_records(args.records)
        if not args.no_filter:
            records = filter_dataset(records)
        backend = make_backend(args.backend, image_encoder=args.image_encoder)
        options = ExportOptions(knowledge=args.knowledge,
                                image_encoder=args.image_encoder)
        manifest, blob = export(records, args.out, backend, options)
    except AssetsUnavailable as exc:
        sys.stderr.write(f"error: {exc} (try --backend hashed)\n")
        return 1
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    sys.stderr.write(f"wrote {manifest} and {blob}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
