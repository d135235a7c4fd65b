"""Pulse-sequence diagrams.

A program renders to one lane per used channel (microwave on top, then
laser, then readout) with a box per event, labeled either with the
configuration variable names or the concrete values. Swept durations
carry a break-mark glyph. The serialized form is a plain SVG document;
geometry depends only on the program, never on the label mode.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .channels import ChannelKind
from .program import LaserPulse, MicrowavePulse, PulseProgram, TriggerWindow

LABELS_NAMES = "variable-names"
LABELS_VALUES = "values"


def parse_label_mode(text: str) -> str:
    """Accept the short CLI spellings alongside the canonical names."""
    t = text.strip().lower()
    if t in ("names", LABELS_NAMES):
        return LABELS_NAMES
    if t in ("values", LABELS_VALUES):
        return LABELS_VALUES
    raise ValueError(f"unknown label mode {text!r}; expected names or values")

_LANE_ORDER = (
    ChannelKind.MICROWAVE,
    ChannelKind.LASER,
    ChannelKind.TRIGGER,
    ChannelKind.DIGITIZER,
)


@dataclass(frozen=True)
class DiagramBox:
    start_ns: float
    length_ns: float
    label: str
    swept: bool = False


@dataclass(frozen=True)
class DiagramLane:
    channel_id: int
    kind: str
    boxes: tuple[DiagramBox, ...]


@dataclass(frozen=True)
class SequenceDiagram:
    lanes: tuple[DiagramLane, ...]
    label_mode: str
    caption: str = ""

    def with_label_mode(self, label_mode: str) -> "SequenceDiagram":
        return replace(self, label_mode=label_mode)


def _default_label(payload) -> str:
    if isinstance(payload, MicrowavePulse):
        return "mw"
    if isinstance(payload, LaserPulse):
        return "laser"
    if isinstance(payload, TriggerWindow):
        return payload.tag
    return "?"


def render_diagram(
    program: PulseProgram, label_mode: str = LABELS_NAMES, caption: str = ""
) -> SequenceDiagram:
    """Box geometry is taken at the first sweep point; a swept start or
    duration is flagged so the serializer can draw the break mark."""
    if label_mode not in (LABELS_NAMES, LABELS_VALUES):
        raise ValueError(f"unknown label mode {label_mode!r}")
    r0 = program.register_values()[0]
    period_ns = program.clock.to_ns(1)

    by_channel: dict[int, list[DiagramBox]] = {}
    for ev in program.events:
        start_ns = ev.start.at_cycles(r0) * period_ns
        length_ns = ev.length.at_cycles(r0) * period_ns
        swept = ev.start.scale != 0 or ev.length.scale != 0
        if label_mode == LABELS_NAMES:
            label = ev.label or _default_label(ev.payload)
        else:
            label = f"{length_ns:g} ns"
        by_channel.setdefault(ev.channel, []).append(
            DiagramBox(start_ns, length_ns, label, swept)
        )

    lanes = []
    kind_rank = {kind: i for i, kind in enumerate(_LANE_ORDER)}
    used = sorted(
        by_channel,
        key=lambda cid: (kind_rank.get(program.channel_by_id(cid).kind, 99), cid),
    )
    for cid in used:
        boxes = tuple(sorted(by_channel[cid], key=lambda b: (b.start_ns, b.length_ns)))
        lanes.append(DiagramLane(cid, program.channel_by_id(cid).kind.value, boxes))
    return SequenceDiagram(tuple(lanes), label_mode, caption)


# ---------------------------------------------------------------------------
# SVG serialization

_LANE_H = 46.0
_LANE_GAP = 16.0
_LEFT = 150.0
_TIME_W = 700.0
_TOP = 46.0
_BOTTOM = 44.0

_LANE_FILL = {
    ChannelKind.MICROWAVE.value: "#7a9ec9",
    ChannelKind.LASER.value: "#7fbf7f",
    ChannelKind.TRIGGER.value: "#d9a066",
    ChannelKind.DIGITIZER.value: "#b89bd4",
}


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def serialize_diagram(diagram: SequenceDiagram) -> str:
    """Deterministic SVG text for a rendered diagram."""
    span = 1.0
    for lane in diagram.lanes:
        for box in lane.boxes:
            span = max(span, box.start_ns + box.length_ns)

    height = _TOP + len(diagram.lanes) * (_LANE_H + _LANE_GAP) + _BOTTOM
    width = _LEFT + _TIME_W + 30.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" font-family="monospace" font-size="12">',
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
    ]
    if diagram.caption:
        out.append(f'<text x="{_fmt(_LEFT)}" y="26" font-size="14">{_esc(diagram.caption)}</text>')

    def x_of(t_ns: float) -> float:
        return _LEFT + t_ns / span * _TIME_W

    for i, lane in enumerate(diagram.lanes):
        y0 = _TOP + i * (_LANE_H + _LANE_GAP)
        mid = y0 + _LANE_H / 2.0
        out.append(
            f'<text x="12" y="{_fmt(mid + 4)}" fill="#333333">{_esc(lane.kind)}</text>'
        )
        out.append(
            f'<line x1="{_fmt(_LEFT)}" y1="{_fmt(y0 + _LANE_H)}" '
            f'x2="{_fmt(_LEFT + _TIME_W)}" y2="{_fmt(y0 + _LANE_H)}" stroke="#999999"/>'
        )
        fill = _LANE_FILL.get(lane.kind, "#cccccc")
        for box in lane.boxes:
            x = x_of(box.start_ns)
            w = max(x_of(box.start_ns + box.length_ns) - x, 3.0)
            out.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y0 + 6)}" width="{_fmt(w)}" '
                f'height="{_fmt(_LANE_H - 12)}" fill="{fill}" stroke="#444444"/>'
            )
            if box.swept:
                out.append(_break_mark(x + w / 2.0, mid))
            out.append(
                f'<text x="{_fmt(x + w / 2.0)}" y="{_fmt(y0 - 2 + _LANE_H + 12)}" '
                f'text-anchor="middle" fill="#222222">{_esc(box.label)}</text>'
            )

    axis_y = _TOP + len(diagram.lanes) * (_LANE_H + _LANE_GAP) + 8.0
    out.append(
        f'<line x1="{_fmt(_LEFT)}" y1="{_fmt(axis_y)}" '
        f'x2="{_fmt(_LEFT + _TIME_W)}" y2="{_fmt(axis_y)}" stroke="#333333"/>'
    )
    out.append(f'<text x="{_fmt(_LEFT)}" y="{_fmt(axis_y + 16)}">0</text>')
    out.append(
        f'<text x="{_fmt(_LEFT + _TIME_W)}" y="{_fmt(axis_y + 16)}" '
        f'text-anchor="end">{_fmt(span)} ns</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _break_mark(cx: float, cy: float) -> str:
    """Zigzag glyph marking a swept duration."""
    pts = [
        (cx - 8, cy + 6), (cx - 3, cy - 6), (cx + 3, cy + 6), (cx + 8, cy - 6),
    ]
    path = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts)
    return f'<polyline points="{path}" fill="none" stroke="#ffffff" stroke-width="2"/>'


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )
