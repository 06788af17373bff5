"""
Naming utilities for deterministic artifact filenames and provenance hashes.
"""

import re
import xxhash


class NamingUtils:
    """Deterministic names: no timestamps or random suffixes, so reruns overwrite identically."""

    @staticmethod
    def cell_filename(index: int) -> str:
        return f"cell_{index:05d}.csv"

    @staticmethod
    def cell_index(filename: str) -> int:
        match = re.fullmatch(r"cell_(\d{5})\.csv", filename)
        if match is None:
            raise ValueError(f"not a cell series filename: {filename}")
        return int(match.group(1))

    @staticmethod
    def group_filename(group: int) -> str:
        return f"group_{group:03d}.csv"

    @staticmethod
    def graph_filename(seed: int) -> str:
        return f"seed_{seed}.txt"

    @staticmethod
    def content_hash(text: str) -> str:
        return xxhash.xxh64(text.encode("utf-8")).hexdigest()
