"""2D board composition: placement checks, ratsnest, grid maze routing, SVG.

Blocks occupy axis-aligned rectangles on a two-layer board. Placement
validation is rotation-aware rectangle math; the ratsnest is the Euclidean
minimum spanning tree of each merged net's pads; routing walks links
shortest-first with a 4-connected breadth-first search on a uniform grid,
trying the whole link on TOP then BOTTOM (no vias). Block interiors are
keepouts on both layers; previously routed tracks block only their own
layer for other nets.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .diagnostics import Diagnostic, Kind, error
from .library import BlockDefinition, Footprint

if TYPE_CHECKING:  # pragma: no cover
    from .composer import MergedNetlist
    from .engine import Design

ROTATIONS = (0, 90, 180, 270)


class UnplacedInstanceError(ValueError):
    """Ratsnest or routing requested while instances are missing placements."""


@dataclass(frozen=True)
class Placement:
    x_mm: float
    y_mm: float
    rot: int = 0

    def __post_init__(self):
        if self.rot not in ROTATIONS:
            raise ValueError(f"rotation must be one of {ROTATIONS}, got {self.rot}")


@dataclass(frozen=True)
class BoardSettings:
    w_mm: float = 100.0
    h_mm: float = 100.0
    pitch_mm: float = 0.5


def occupied_size(footprint: Footprint, rot: int) -> tuple[float, float]:
    if rot in (90, 270):
        return footprint.height_mm, footprint.width_mm
    return footprint.width_mm, footprint.height_mm


def placed_rect(footprint: Footprint, placement: Placement) -> tuple[float, float, float, float]:
    """(x0, y0, x1, y1) of the rotated footprint, lower-left at the placement."""
    w, h = occupied_size(footprint, placement.rot)
    return placement.x_mm, placement.y_mm, placement.x_mm + w, placement.y_mm + h


def transform_pad(footprint: Footprint, placement: Placement, x_mm: float, y_mm: float) -> tuple[float, float]:
    """Footprint-local pad position -> absolute board position."""
    w, h = footprint.width_mm, footprint.height_mm
    if placement.rot == 0:
        lx, ly = x_mm, y_mm
    elif placement.rot == 90:
        lx, ly = h - y_mm, x_mm
    elif placement.rot == 180:
        lx, ly = w - x_mm, h - y_mm
    else:
        lx, ly = y_mm, w - x_mm
    return placement.x_mm + lx, placement.y_mm + ly


def rects_overlap(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> bool:
    """Strict interior overlap; sharing an edge is not an overlap."""
    eps = 1e-9
    return a[0] < b[2] - eps and b[0] < a[2] - eps and a[1] < b[3] - eps and b[1] < a[3] - eps


def boundary_diagnostic(
    instance_id: str, footprint: Footprint, placement: Placement, board: BoardSettings
) -> Diagnostic | None:
    x0, y0, x1, y1 = placed_rect(footprint, placement)
    eps = 1e-9
    if x0 < -eps or y0 < -eps or x1 > board.w_mm + eps or y1 > board.h_mm + eps:
        return error(
            Kind.BOUNDARY_VIOLATION,
            f"instance/{instance_id}/placement",
            f"placement extends outside the {board.w_mm:g}x{board.h_mm:g} mm board",
        )
    return None


def overlap_diagnostic(
    id_a: str, rect_a: tuple[float, float, float, float],
    id_b: str, rect_b: tuple[float, float, float, float],
) -> Diagnostic | None:
    if not rects_overlap(rect_a, rect_b):
        return None
    first, second = sorted((id_a, id_b))
    return error(
        Kind.OVERLAP,
        f"instance/{first}/placement",
        f"footprint overlaps instance/{second}",
    )


@dataclass(frozen=True)
class PadSite:
    """One footprint pad at its absolute board position."""

    pad_id: str  # "<instance>/<net>/<index>", lexicographic tie-break key
    instance_id: str
    net_id: str
    x_mm: float
    y_mm: float


@dataclass(frozen=True)
class RatsnestLink:
    net_name: str
    pad_a: PadSite
    pad_b: PadSite

    @property
    def length_mm(self) -> float:
        return math.hypot(self.pad_a.x_mm - self.pad_b.x_mm, self.pad_a.y_mm - self.pad_b.y_mm)

    @property
    def subject(self) -> str:
        return f"net/{self.net_name}/link/{self.pad_a.pad_id}~{self.pad_b.pad_id}"


@dataclass(frozen=True)
class Track:
    net_name: str
    layer: str  # "TOP" | "BOTTOM"
    points: tuple[tuple[int, int], ...]  # grid coordinates (col, row)

    def points_mm(self, pitch: float) -> list[tuple[float, float]]:
        return [(c * pitch, r * pitch) for c, r in self.points]


@dataclass
class BoardLayout:
    """Placements plus routing results for one board."""

    board: BoardSettings
    blocks: dict[str, BlockDefinition]  # instance_id -> definition
    placements: dict[str, Placement] = field(default_factory=dict)
    tracks: list[Track] = field(default_factory=list)

    def rect(self, instance_id: str) -> tuple[float, float, float, float]:
        return placed_rect(self.blocks[instance_id].footprint, self.placements[instance_id])


def place(layout: BoardLayout, instance_id: str, x_mm: float, y_mm: float, rot: int = 0) -> list[Diagnostic]:
    """Store a placement; boundary and overlap problems flag but do not undo it."""
    if instance_id not in layout.blocks:
        raise KeyError(f"no instance {instance_id!r} on this layout")
    placement = Placement(x_mm, y_mm, rot)
    layout.placements[instance_id] = placement
    diags: list[Diagnostic] = []
    footprint = layout.blocks[instance_id].footprint
    bound = boundary_diagnostic(instance_id, footprint, placement, layout.board)
    if bound:
        diags.append(bound)
    rect = placed_rect(footprint, placement)
    for other_id in sorted(layout.placements):
        if other_id == instance_id:
            continue
        diag = overlap_diagnostic(instance_id, rect, other_id, layout.rect(other_id))
        if diag:
            diags.append(diag)
    return diags


def pad_sites(design: "Design", net_name: str, netlist: "MergedNetlist") -> list[PadSite]:
    """Absolute pad positions of every footprint pad feeding one merged net."""
    sites: list[PadSite] = []
    for instance_id, local_net in netlist.net_sources.get(net_name, ()):
        block = design.library.get_block(design.instances[instance_id].block_id)
        placement = design.placements.get(instance_id)
        if placement is None:
            raise UnplacedInstanceError(f"instance {instance_id!r} is not placed")
        for index, pad in enumerate(block.footprint.pads):
            if pad.net_id != local_net:
                continue
            x, y = transform_pad(block.footprint, placement, pad.x_mm, pad.y_mm)
            sites.append(
                PadSite(
                    pad_id=f"{instance_id}/{local_net}/{index}",
                    instance_id=instance_id,
                    net_id=local_net,
                    x_mm=x,
                    y_mm=y,
                )
            )
    return sites


def _mst_links(net_name: str, sites: list[PadSite]) -> list[RatsnestLink]:
    """Kruskal over the complete pad graph; ties break on pad id pairs."""
    if len(sites) < 2:
        return []
    ordered = sorted(sites, key=lambda s: s.pad_id)
    candidates: list[tuple[float, str, str, PadSite, PadSite]] = []
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            dist = math.hypot(a.x_mm - b.x_mm, a.y_mm - b.y_mm)
            candidates.append((dist, a.pad_id, b.pad_id, a, b))
    candidates.sort(key=lambda t: (t[0], t[1], t[2]))
    parent = {s.pad_id: s.pad_id for s in ordered}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    links: list[RatsnestLink] = []
    for dist, ida, idb, a, b in candidates:
        ra, rb = find(ida), find(idb)
        if ra == rb:
            continue
        parent[ra] = rb
        links.append(RatsnestLink(net_name=net_name, pad_a=a, pad_b=b))
        if len(links) == len(ordered) - 1:
            break
    return links


def ratsnest(design: "Design", netlist: "MergedNetlist") -> list[RatsnestLink]:
    """Minimum-spanning-tree links for every merged net spanning >= 2 pads."""
    unplaced = sorted(set(design.instances) - set(design.placements))
    if unplaced:
        raise UnplacedInstanceError(f"instances not placed: {', '.join(unplaced)}")
    links: list[RatsnestLink] = []
    for net_name in sorted(netlist.nets):
        links.extend(_mst_links(net_name, pad_sites(design, net_name, netlist)))
    return links


class RoutingGrid:
    """Static obstacle field shared by every link of one routing run."""

    def __init__(self, board: BoardSettings):
        self.pitch = board.pitch_mm
        self.cols = int(round(board.w_mm / self.pitch)) + 1
        self.rows = int(round(board.h_mm / self.pitch)) + 1
        # Cells strictly inside any block rectangle; blocks both layers.
        self.keepout: set[tuple[int, int]] = set()
        # Pad cells by owning net; foreign pads are obstacles on both layers.
        self.pad_cells: dict[tuple[int, int], set[str]] = {}

    def snap(self, x_mm: float, y_mm: float) -> tuple[int, int]:
        return (int(round(x_mm / self.pitch)), int(round(y_mm / self.pitch)))

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.cols and 0 <= cell[1] < self.rows

    def add_block_rect(self, rect: tuple[float, float, float, float]) -> None:
        eps = 1e-6
        c0 = math.floor((rect[0] + eps) / self.pitch) + 1
        c1 = math.ceil((rect[2] - eps) / self.pitch) - 1
        r0 = math.floor((rect[1] + eps) / self.pitch) + 1
        r1 = math.ceil((rect[3] - eps) / self.pitch) - 1
        for c in range(max(c0, 0), min(c1, self.cols - 1) + 1):
            for r in range(max(r0, 0), min(r1, self.rows - 1) + 1):
                self.keepout.add((c, r))

    def add_pad(self, cell: tuple[int, int], net_name: str) -> None:
        self.pad_cells.setdefault(cell, set()).add(net_name)

    def blocked(self, cell: tuple[int, int], net_name: str, targets: tuple[tuple[int, int], tuple[int, int]]) -> bool:
        if cell in targets:
            return False
        if cell in self.keepout:
            return True
        owners = self.pad_cells.get(cell)
        return owners is not None and net_name not in owners


def build_grid(design: "Design", netlist: "MergedNetlist") -> RoutingGrid:
    grid = RoutingGrid(design.board)
    for instance_id in sorted(design.placements):
        block = design.library.get_block(design.instances[instance_id].block_id)
        grid.add_block_rect(placed_rect(block.footprint, design.placements[instance_id]))
    for net_name in sorted(netlist.nets):
        for site in pad_sites(design, net_name, netlist):
            grid.add_pad(grid.snap(site.x_mm, site.y_mm), net_name)
    return grid


_NEIGHBORS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def bfs_path(
    grid: RoutingGrid,
    start: tuple[int, int],
    goal: tuple[int, int],
    net_name: str,
    occupied: set[tuple[int, int]],
) -> list[tuple[int, int]] | None:
    """Shortest 4-connected path avoiding keepouts, foreign pads, and
    ``occupied`` cells (other nets' tracks on this layer)."""
    targets = (start, goal)
    if not grid.in_bounds(start) or not grid.in_bounds(goal):
        return None
    if start == goal:
        return [start]
    prev: dict[tuple[int, int], tuple[int, int]] = {start: start}
    queue: deque[tuple[int, int]] = deque([start])
    while queue:
        cell = queue.popleft()
        for dc, dr in _NEIGHBORS:
            nxt = (cell[0] + dc, cell[1] + dr)
            if nxt in prev or not grid.in_bounds(nxt):
                continue
            if nxt in occupied and nxt not in targets:
                continue
            if grid.blocked(nxt, net_name, targets):
                continue
            prev[nxt] = cell
            if nxt == goal:
                path = [nxt]
                while path[-1] != start:
                    path.append(prev[path[-1]])
                path.reverse()
                return path
            queue.append(nxt)
    return None


def route(
    grid: RoutingGrid, links: list[RatsnestLink]
) -> tuple[list[Track], list[Diagnostic]]:
    """Route links shortest-first, whole link on TOP then BOTTOM, no rip-up.

    Failures become Unroutable diagnostics; routing always continues.
    """
    ordered = sorted(links, key=lambda l: (l.length_mm, l.net_name, l.pad_a.pad_id, l.pad_b.pad_id))
    used: dict[str, dict[tuple[int, int], str]] = {"TOP": {}, "BOTTOM": {}}
    tracks: list[Track] = []
    diags: list[Diagnostic] = []
    for link in ordered:
        start = grid.snap(link.pad_a.x_mm, link.pad_a.y_mm)
        goal = grid.snap(link.pad_b.x_mm, link.pad_b.y_mm)
        path = None
        layer_used = None
        for layer in ("TOP", "BOTTOM"):
            occupied = {cell for cell, net in used[layer].items() if net != link.net_name}
            path = bfs_path(grid, start, goal, link.net_name, occupied)
            if path is not None:
                layer_used = layer
                break
        if path is None:
            diags.append(
                error(
                    Kind.UNROUTABLE,
                    link.subject,
                    f"no route found for net {link.net_name} between {link.pad_a.pad_id} and {link.pad_b.pad_id}",
                )
            )
            continue
        assert layer_used is not None
        for cell in path:
            used[layer_used][cell] = link.net_name
        tracks.append(Track(net_name=link.net_name, layer=layer_used, points=tuple(path)))
    return tracks, diags


@dataclass
class BoardResult:
    """Everything board composition produces for one design."""

    links: list[RatsnestLink]
    tracks: list[Track]
    diagnostics: list[Diagnostic]
    svg: str


def compose_board(design: "Design", netlist: "MergedNetlist") -> BoardResult:
    """Ratsnest, route, and render one placed design."""
    links = ratsnest(design, netlist)
    grid = build_grid(design, netlist)
    tracks, diags = route(grid, links)
    failed = {d.subject for d in diags}
    unrouted = [l for l in links if l.subject in failed]
    svg = export_board_svg(design, netlist, tracks, unrouted)
    return BoardResult(links=links, tracks=tracks, diagnostics=diags, svg=svg)


_LAYER_COLORS = {"TOP": "#c83232", "BOTTOM": "#3264c8"}


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def export_board_svg(
    design: "Design",
    netlist: "MergedNetlist",
    tracks: list[Track],
    unrouted: list[RatsnestLink] | None = None,
) -> str:
    """Deterministic SVG: outline, silkscreen block borders with names, pads,
    per-layer colored tracks, and dashed unrouted links."""
    board = design.board
    w, h = board.w_mm, board.h_mm
    scale = 4.0

    def ty(y: float) -> float:  # board y-up -> svg y-down
        return h - y

    out: list[str] = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(w * scale)}" '
        f'height="{_fmt(h * scale)}" viewBox="0 0 {_fmt(w)} {_fmt(h)}">'
    )
    out.append(f'<rect x="0" y="0" width="{_fmt(w)}" height="{_fmt(h)}" fill="#0a3d1e"/>')
    for instance_id in sorted(design.placements):
        block = design.library.get_block(design.instances[instance_id].block_id)
        x0, y0, x1, y1 = placed_rect(block.footprint, design.placements[instance_id])
        out.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(ty(y1))}" width="{_fmt(x1 - x0)}" height="{_fmt(y1 - y0)}" '
            f'fill="none" stroke="#ffffff" stroke-width="0.3"/>'
        )
        out.append(
            f'<text x="{_fmt(x0 + 0.6)}" y="{_fmt(ty(y1) + 2.2)}" font-size="2" '
            f'fill="#ffffff" font-family="monospace">{instance_id}:{block.block_id}</text>'
        )
    for track in sorted(tracks, key=lambda t: (t.net_name, t.layer, t.points)):
        pts = " ".join(f"{_fmt(c * board.pitch_mm)},{_fmt(ty(r * board.pitch_mm))}" for c, r in track.points)
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{_LAYER_COLORS[track.layer]}" stroke-width="0.35"/>'
        )
    for link in sorted(unrouted or [], key=lambda l: l.subject):
        out.append(
            f'<line x1="{_fmt(link.pad_a.x_mm)}" y1="{_fmt(ty(link.pad_a.y_mm))}" '
            f'x2="{_fmt(link.pad_b.x_mm)}" y2="{_fmt(ty(link.pad_b.y_mm))}" '
            f'stroke="#f0e020" stroke-width="0.25" stroke-dasharray="1,1"/>'
        )
    for net_name in sorted(netlist.nets):
        for site in sorted(pad_sites(design, net_name, netlist), key=lambda s: s.pad_id):
            out.append(
                f'<circle cx="{_fmt(site.x_mm)}" cy="{_fmt(ty(site.y_mm))}" r="0.6" fill="#d8b332"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"
