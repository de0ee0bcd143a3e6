"""Boxoban level collections: parsing, validation, loading, fetching, sampling.

On-disk format: files named NNN.txt, each level a header line "; <index>"
followed by 10 rows of 10 characters. '*' and '+' are accepted on input so
intermediate game snapshots serialize with the same vocabulary, even though
Boxoban starting positions never contain them.
"""
from __future__ import annotations

import enum
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GRID_SIZE = 10

_CHAR_TO_PARTS = {
    "#": (True, False, False, False),   # wall, target, box, player
    " ": (False, False, False, False),
    ".": (False, True, False, False),
    "$": (False, False, True, False),
    "*": (False, True, True, False),
    "@": (False, False, False, True),
    "+": (False, True, False, True),
}


class Tile(enum.Enum):
    WALL = "#"
    FLOOR = " "
    TARGET = "."
    BOX = "$"
    BOX_ON_TARGET = "*"
    PLAYER = "@"
    PLAYER_ON_TARGET = "+"


LevelId = tuple[str, int, int]  # (split, file index, level index within file)


class LevelError(ValueError):
    """Malformed level text or a level violating the Boxoban invariants."""


@dataclass(frozen=True)
class Level:
    """Immutable puzzle description. Coordinates are (row, col)."""

    walls: frozenset[tuple[int, int]]
    targets: frozenset[tuple[int, int]]
    boxes: frozenset[tuple[int, int]]
    player: tuple[int, int]
    height: int
    width: int
    id: LevelId = ("adhoc", 0, 0)

    def __post_init__(self):
        if self.player in self.walls or self.player in self.boxes:
            raise LevelError(f"player at {self.player} overlaps a wall or box")
        if self.boxes & self.walls:
            raise LevelError("box placed on a wall")
        if self.targets & self.walls:
            raise LevelError("target placed on a wall")
        if len(self.boxes) != len(self.targets):
            raise LevelError(f"{len(self.boxes)} boxes vs {len(self.targets)} targets")
        for r in range(self.height):
            for c in (0, self.width - 1):
                if (r, c) not in self.walls:
                    raise LevelError(f"open edge at {(r, c)}")
        for c in range(self.width):
            for r in (0, self.height - 1):
                if (r, c) not in self.walls:
                    raise LevelError(f"open edge at {(r, c)}")

    def tile_at(self, r: int, c: int) -> Tile:
        pos = (r, c)
        on_target = pos in self.targets
        if pos in self.walls:
            return Tile.WALL
        if pos == self.player:
            return Tile.PLAYER_ON_TARGET if on_target else Tile.PLAYER
        if pos in self.boxes:
            return Tile.BOX_ON_TARGET if on_target else Tile.BOX
        return Tile.TARGET if on_target else Tile.FLOOR


@dataclass(frozen=True)
class LevelSet:
    """Ordered, immutable collection of levels from one split."""

    split: str
    levels: tuple[Level, ...]
    file_counts: tuple[tuple[str, int], ...] = ()

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i: int) -> Level:
        return self.levels[i]

    def by_id(self, file_index: int, level_index: int) -> Level:
        for lv in self.levels:
            if lv.id[1] == file_index and lv.id[2] == level_index:
                return lv
        raise KeyError(f"no level ({file_index}, {level_index}) in split {self.split!r}")


def parse_grid(lines: list[str], *, expect_size: tuple[int, int] | None = (GRID_SIZE, GRID_SIZE),
               id: LevelId = ("adhoc", 0, 0)) -> Level:
    """Parse grid rows into a Level; `expect_size=None` allows non-10x10 fixtures."""
    if expect_size is not None:
        eh, ew = expect_size
        if len(lines) != eh:
            raise LevelError(f"expected {eh} rows, got {len(lines)}")
    height = len(lines)
    if height == 0:
        raise LevelError("empty grid")
    width = len(lines[0])
    walls, targets, boxes = set(), set(), set()
    players = []
    for r, row in enumerate(lines):
        if len(row) != width or (expect_size is not None and len(row) != expect_size[1]):
            raise LevelError(f"row {r} has width {len(row)}, expected {width}")
        for c, ch in enumerate(row):
            try:
                is_wall, is_target, is_box, is_player = _CHAR_TO_PARTS[ch]
            except KeyError:
                raise LevelError(f"unsupported character {ch!r} at ({r}, {c})") from None
            if is_wall:
                walls.add((r, c))
            if is_target:
                targets.add((r, c))
            if is_box:
                boxes.add((r, c))
            if is_player:
                players.append((r, c))
    if len(players) != 1:
        raise LevelError(f"expected exactly one player, found {len(players)}")
    return Level(walls=frozenset(walls), targets=frozenset(targets), boxes=frozenset(boxes),
                 player=players[0], height=height, width=width, id=id)


def parse_level(text: str, id: LevelId = ("adhoc", 0, 0)) -> Level:
    """Parse a 10x10 level from its multi-line text form."""
    lines = [ln for ln in text.splitlines() if ln.strip("\r")]
    return parse_grid(lines, id=id)


def serialize_level(level: Level) -> str:
    """Canonical text form; inverse of parse_level on canonical input."""
    rows = []
    for r in range(level.height):
        rows.append("".join(level.tile_at(r, c).value for c in range(level.width)))
    return "\n".join(rows)


def _parse_file(path: Path, split: str, file_index: int) -> list[Level]:
    levels: list[Level] = []
    lines = path.read_text(encoding="ascii").splitlines()
    cursor = 0
    while cursor < len(lines):
        line = lines[cursor]
        if not line.strip():
            cursor += 1
            continue
        if not line.startswith(";"):
            raise LevelError(f"{path}:{cursor + 1}: expected '; <index>' header, got {line!r}")
        try:
            level_index = int(line[1:].strip())
        except ValueError:
            raise LevelError(f"{path}:{cursor + 1}: bad level index in {line!r}") from None
        grid_lines = lines[cursor + 1:cursor + 1 + GRID_SIZE]
        if len(grid_lines) < GRID_SIZE:
            raise LevelError(f"{path}:{cursor + 1}: truncated level")
        try:
            level = parse_grid(grid_lines, id=(split, file_index, level_index))
        except LevelError as e:
            raise LevelError(f"{path}:{cursor + 2}: {e}") from None
        if len(level.boxes) != 4:
            raise LevelError(f"{path}:{cursor + 2}: expected 4 boxes, got {len(level.boxes)}")
        levels.append(level)
        cursor += 1 + GRID_SIZE
    return levels


def _file_index_from_name(path: Path) -> int:
    try:
        return int(path.stem)
    except ValueError:
        return 0


def load_collection(path: str | Path, split: str | None = None) -> LevelSet:
    """Load a Boxoban directory (or single file) into a LevelSet, in file order."""
    path = Path(path)
    if split is None:
        split = path.stem if path.is_file() else path.name
    if path.is_file():
        files = [path]
    elif path.is_dir():
        files = sorted(path.glob("*.txt"))
    else:
        raise FileNotFoundError(f"no such level source: {path}")
    if not files:
        raise LevelError(f"no level files found in {path}")
    levels: list[Level] = []
    file_counts: list[tuple[str, int]] = []
    for f in files:
        parsed = _parse_file(f, split, _file_index_from_name(f))
        if not parsed:
            raise LevelError(f"{f}: contains no levels")
        levels.extend(parsed)
        file_counts.append((f.name, len(parsed)))
    return LevelSet(split=split, levels=tuple(levels), file_counts=tuple(file_counts))


def sample_levels(level_set: LevelSet, k: int, seed: int) -> list[Level]:
    """Deterministic sample without replacement."""
    if k > len(level_set):
        raise ValueError(f"k={k} exceeds set size {len(level_set)}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(level_set), size=k, replace=False)
    return [level_set.levels[i] for i in idx]


# ---------------------------------------------------------------------------
# dataset fetching

DEFAULT_BASE_URL = "https://raw.githubusercontent.com/google-deepmind/boxoban-levels/master"

SPLIT_PATHS = {
    "unfiltered-train": "unfiltered/train",
    "unfiltered-valid": "unfiltered/valid",
    "unfiltered-test": "unfiltered/test",
    "medium-train": "medium/train",
    "medium-valid": "medium/valid",
    "hard": "hard",
}


def fetch_dataset(split: str, dest: str | Path, base_url: str = DEFAULT_BASE_URL,
                  max_files: int = 1000, retries: int = 3, backoff: float = 1.0) -> LevelSet:
    """Download a split into a local cache (idempotent) and load it.

    Files are fetched sequentially (000.txt, 001.txt, ...) until the server
    reports a missing file; sha256 checksums are recorded in a manifest and
    verified on warm-cache hits, so a second call makes no network requests.
    """
    import requests
    from filelock import FileLock

    if split not in SPLIT_PATHS:
        raise ValueError(f"unknown split {split!r}; expected one of {sorted(SPLIT_PATHS)}")
    rel = SPLIT_PATHS[split]
    dest = Path(dest)
    split_dir = dest / rel
    split_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = dest / "manifest.json"
    lock = FileLock(str(dest / ".fetch.lock"))

    with lock:
        manifest = {}
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text())
        complete_key = f"{rel}/.complete"
        if manifest.get(complete_key):
            for fname, digest in manifest.items():
                if fname.startswith(rel + "/") and fname.endswith(".txt"):
                    fpath = dest / fname
                    if not fpath.exists() or _sha256(fpath) != digest:
                        raise IOError(f"cache corrupt: checksum mismatch for {fname}")
            return load_collection(split_dir, split=split)

        session = requests.Session()
        for i in range(max_files):
            fname = f"{i:03d}.txt"
            url = f"{base_url}/{rel}/{fname}"
            body = _get_with_retries(session, url, retries, backoff)
            if body is None:
                break  # first missing file ends the split
            fpath = split_dir / fname
            fpath.write_bytes(body)
            manifest[f"{rel}/{fname}"] = _sha256(fpath)
        else:
            i = max_files
        if i == 0:
            raise IOError(f"no files found for split {split!r} at {base_url}/{rel}")
        manifest[complete_key] = True
        manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return load_collection(split_dir, split=split)


def _get_with_retries(session, url: str, retries: int, backoff: float) -> bytes | None:
    last_error: Exception | None = None
    for attempt in range(retries):
        try:
            resp = session.get(url, timeout=30)
            if resp.status_code == 404:
                return None
            resp.raise_for_status()
            return resp.content
        except Exception as e:  # noqa: BLE001 - network errors retry uniformly
            last_error = e
            time.sleep(backoff * (2 ** attempt))
    raise IOError(f"failed to fetch {url}: {last_error}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()
