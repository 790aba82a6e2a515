"""SVG parsing and normalization.

Turns an SVG document into a flat list of transform-free paths. Groups are
dissolved, every transform is baked into absolute coordinates, basic shapes
(line, rect, circle, ellipse, polyline, polygon) are rewritten as path
command sequences, and relative / shorthand path commands are expanded to
the absolute canonical set {M, L, C, Q, A, Z}.
"""
from __future__ import annotations

import logging
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

log = logging.getLogger(__name__)


class MalformedMarkup(ValueError):
    """The input is not well-formed XML/SVG."""

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (line {position[0]}, column {position[1]})"
        super().__init__(message)


class UnsupportedSvgFeature(ValueError):
    """An SVG element outside the supported subset was encountered."""

    def __init__(self, tag: str):
        self.tag = tag
        super().__init__(f"unsupported SVG element <{tag}>")


class UnsupportedTransformKind(ValueError):
    """A transform attribute uses a non-affine or unknown operation."""


class NonInvertibleTransform(ValueError):
    """An operation required inverting a singular transform."""


class BadPathData(ValueError):
    """A d-attribute could not be tokenized."""

    def __init__(self, message: str, offset: int, token: str = ""):
        self.offset = offset
        self.token = token
        super().__init__(f"{message} at offset {offset}: {token!r}")


# Command alphabet and the number of parameters each command carries.
PARAM_COUNTS = {
    "M": 2, "L": 2, "H": 1, "V": 1, "C": 6,
    "S": 4, "Q": 4, "T": 2, "A": 7, "Z": 0,
}
COMMAND_KINDS = "MLHVCSQTAZ"

# Elements handled by the ingest: these produce geometry...
_SHAPE_TAGS = {"line", "rect", "circle", "ellipse", "polyline", "polygon"}
_CONTAINER_TAGS = {"svg", "g"}
# ...these are silently dropped (text is filtered out on purpose; defs and
# document metadata carry no drawable geometry of their own).
_IGNORED_TAGS = {"defs", "text", "title", "desc", "metadata"}


@dataclass(frozen=True)
class AffineTransform2D:
    """2D affine map: x' = a*x + c*y + e, y' = b*x + d*y + f."""

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 1.0
    e: float = 0.0
    f: float = 0.0

    @staticmethod
    def identity() -> "AffineTransform2D":
        return AffineTransform2D()

    @staticmethod
    def translation(tx: float, ty: float) -> "AffineTransform2D":
        return AffineTransform2D(1, 0, 0, 1, tx, ty)

    @staticmethod
    def scaling(sx: float, sy: float | None = None) -> "AffineTransform2D":
        if sy is None:
            sy = sx
        return AffineTransform2D(sx, 0, 0, sy, 0, 0)

    @staticmethod
    def rotation(degrees: float, cx: float = 0.0, cy: float = 0.0) -> "AffineTransform2D":
        rad = math.radians(degrees)
        cos_a, sin_a = math.cos(rad), math.sin(rad)
        rot = AffineTransform2D(cos_a, sin_a, -sin_a, cos_a, 0, 0)
        if cx or cy:
            return (
                AffineTransform2D.translation(cx, cy)
                .compose(rot)
                .compose(AffineTransform2D.translation(-cx, -cy))
            )
        return rot

    def compose(self, inner: "AffineTransform2D") -> "AffineTransform2D":
        """Return self applied after `inner` (matrix product self @ inner)."""
        a1, b1, c1, d1, e1, f1 = self.a, self.b, self.c, self.d, self.e, self.f
        a2, b2, c2, d2, e2, f2 = inner.a, inner.b, inner.c, inner.d, inner.e, inner.f
        return AffineTransform2D(
            a1 * a2 + c1 * b2,
            b1 * a2 + d1 * b2,
            a1 * c2 + c1 * d2,
            b1 * c2 + d1 * d2,
            a1 * e2 + c1 * f2 + e1,
            b1 * e2 + d1 * f2 + f1,
        )

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return (self.a * x + self.c * y + self.e, self.b * x + self.d * y + self.f)

    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    def is_identity(self, tol: float = 0.0) -> bool:
        return (
            abs(self.a - 1) <= tol and abs(self.b) <= tol and abs(self.c) <= tol
            and abs(self.d - 1) <= tol and abs(self.e) <= tol and abs(self.f) <= tol
        )

    def is_conformal(self, rtol: float = 1e-12) -> bool:
        """True for uniform-scale + rotation + translation (no shear, no
        reflection, no anisotropic scale); such maps preserve arc shape."""
        n1 = self.a * self.a + self.b * self.b
        n2 = self.c * self.c + self.d * self.d
        dot = self.a * self.c + self.b * self.d
        scale = max(n1, n2, 1e-300)
        return abs(n1 - n2) <= rtol * scale and abs(dot) <= rtol * scale and self.determinant() > 0


@dataclass(frozen=True)
class PathCommand:
    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in PARAM_COUNTS:
            raise BadPathData(f"unknown command kind {self.kind!r}", 0, self.kind)
        if len(self.params) != PARAM_COUNTS[self.kind]:
            raise BadPathData(
                f"command {self.kind} expects {PARAM_COUNTS[self.kind]} parameters, "
                f"got {len(self.params)}", 0, self.kind)

    def __str__(self):
        if not self.params:
            return self.kind
        return self.kind + " " + " ".join(f"{p:.9g}" for p in self.params)


@dataclass(frozen=True)
class StyleAttributes:
    has_fill: bool = True
    stroke_rgb: tuple[float, float, float] = (0.0, 0.0, 0.0)
    stroke_width: float = 1.0


@dataclass(frozen=True)
class NormalizedPath:
    """One flattened, transform-free path: the atomic drawing element."""

    path_id: int
    commands: tuple[PathCommand, ...]
    style: StyleAttributes = StyleAttributes()
    source_layer: Optional[str] = None

    def d_string(self) -> str:
        return " ".join(str(c) for c in self.commands)


@dataclass
class RawSvgDocument:
    source_id: str
    root: ET.Element
    viewbox: Optional[tuple[float, float, float, float]] = None
    ignored: list[str] = field(default_factory=list)


_NUMBER_RE = re.compile(r"[+-]?(?:\d*\.\d+|\d+\.?)(?:[eE][+-]?\d+)?")
_WSP = " \t\r\n,"


class _PathScanner:
    """Cursor-based tokenizer for d-attribute strings.

    Arc flags need position-aware lexing ("A 1 1 0 011,0" packs two flags
    and a coordinate into one run of digits), so a plain number regex over
    the whole string is not enough.
    """

    def __init__(self, data: str):
        self.data = data
        self.pos = 0

    def _skip_separators(self):
        while self.pos < len(self.data) and self.data[self.pos] in _WSP:
            self.pos += 1

    def at_end(self) -> bool:
        self._skip_separators()
        return self.pos >= len(self.data)

    def peek_command(self) -> Optional[str]:
        self._skip_separators()
        if self.pos < len(self.data) and self.data[self.pos].isalpha():
            return self.data[self.pos]
        return None

    def take_command(self) -> str:
        ch = self.data[self.pos]
        self.pos += 1
        return ch

    def take_number(self) -> float:
        self._skip_separators()
        m = _NUMBER_RE.match(self.data, self.pos)
        if not m:
            raise BadPathData("expected number", self.pos, self.data[self.pos:self.pos + 8])
        self.pos = m.end()
        return float(m.group(0))

    def take_flag(self) -> float:
        self._skip_separators()
        if self.pos >= len(self.data) or self.data[self.pos] not in "01":
            raise BadPathData("expected arc flag 0 or 1", self.pos,
                              self.data[self.pos:self.pos + 8])
        flag = float(self.data[self.pos])
        self.pos += 1
        return flag


def parse_path_data(d: str) -> list[tuple[str, tuple[float, ...]]]:
    """Tokenize a d attribute into (letter, params) pairs.

    Case is preserved (lowercase = relative); implicit command repetition is
    expanded here, including the moveto-then-lineto rule.
    """
    scanner = _PathScanner(d)
    out: list[tuple[str, tuple[float, ...]]] = []
    prev_letter: Optional[str] = None
    while not scanner.at_end():
        letter = scanner.peek_command()
        if letter is not None:
            if letter.upper() not in PARAM_COUNTS:
                raise BadPathData("unknown path command", scanner.pos, letter)
            scanner.take_command()
        else:
            if prev_letter is None:
                raise BadPathData("path data must start with a command", scanner.pos,
                                  d[:8])
            # Implicit repeat: M becomes L, m becomes l.
            letter = {"M": "L", "m": "l"}.get(prev_letter, prev_letter)
        count = PARAM_COUNTS[letter.upper()]
        if letter.upper() == "A":
            params = (scanner.take_number(), scanner.take_number(), scanner.take_number(),
                      scanner.take_flag(), scanner.take_flag(),
                      scanner.take_number(), scanner.take_number())
        else:
            params = tuple(scanner.take_number() for _ in range(count))
        out.append((letter, params))
        prev_letter = letter
    if not out:
        raise BadPathData("empty path data", 0, d[:8])
    return out


def canonicalize_commands(
    commands: str | Sequence[tuple[str, tuple[float, ...]]],
) -> tuple[PathCommand, ...]:
    """Rewrite a raw command stream to the absolute canonical alphabet.

    Relative commands become absolute, H/V become L, S/T get their reflected
    control point and become C/Q. The result uses only {M, L, C, Q, A, Z}.
    """
    if isinstance(commands, str):
        commands = parse_path_data(commands)
    if not commands or commands[0][0].upper() != "M":
        raise BadPathData("path must start with a moveto", 0,
                          commands[0][0] if commands else "")

    out: list[PathCommand] = []
    cx, cy = 0.0, 0.0          # current point
    sx, sy = 0.0, 0.0          # subpath start
    prev_cubic_cp: Optional[tuple[float, float]] = None
    prev_quad_cp: Optional[tuple[float, float]] = None

    for letter, params in commands:
        kind = letter.upper()
        rel = letter.islower()

        if kind == "M":
            x, y = params
            if rel:
                x, y = cx + x, cy + y
            out.append(PathCommand("M", (x, y)))
            cx, cy = x, y
            sx, sy = x, y
        elif kind == "L":
            x, y = params
            if rel:
                x, y = cx + x, cy + y
            out.append(PathCommand("L", (x, y)))
            cx, cy = x, y
        elif kind == "H":
            x = params[0] + (cx if rel else 0.0)
            out.append(PathCommand("L", (x, cy)))
            cx = x
        elif kind == "V":
            y = params[0] + (cy if rel else 0.0)
            out.append(PathCommand("L", (cx, y)))
            cy = y
        elif kind == "C":
            x1, y1, x2, y2, x, y = params
            if rel:
                x1, y1, x2, y2, x, y = cx + x1, cy + y1, cx + x2, cy + y2, cx + x, cy + y
            out.append(PathCommand("C", (x1, y1, x2, y2, x, y)))
            prev_cubic_cp = (x2, y2)
            cx, cy = x, y
            prev_quad_cp = None
            continue
        elif kind == "S":
            x2, y2, x, y = params
            if rel:
                x2, y2, x, y = cx + x2, cy + y2, cx + x, cy + y
            if prev_cubic_cp is not None:
                x1, y1 = 2 * cx - prev_cubic_cp[0], 2 * cy - prev_cubic_cp[1]
            else:
                x1, y1 = cx, cy
            out.append(PathCommand("C", (x1, y1, x2, y2, x, y)))
            prev_cubic_cp = (x2, y2)
            cx, cy = x, y
            prev_quad_cp = None
            continue
        elif kind == "Q":
            x1, y1, x, y = params
            if rel:
                x1, y1, x, y = cx + x1, cy + y1, cx + x, cy + y
            out.append(PathCommand("Q", (x1, y1, x, y)))
            prev_quad_cp = (x1, y1)
            cx, cy = x, y
            prev_cubic_cp = None
            continue
        elif kind == "T":
            x, y = params
            if rel:
                x, y = cx + x, cy + y
            if prev_quad_cp is not None:
                x1, y1 = 2 * cx - prev_quad_cp[0], 2 * cy - prev_quad_cp[1]
            else:
                x1, y1 = cx, cy
            out.append(PathCommand("Q", (x1, y1, x, y)))
            prev_quad_cp = (x1, y1)
            cx, cy = x, y
            prev_cubic_cp = None
            continue
        elif kind == "A":
            rx, ry, rot, laf, swf, x, y = params
            if rel:
                x, y = cx + x, cy + y
            out.append(PathCommand("A", (rx, ry, rot, laf, swf, x, y)))
            cx, cy = x, y
        elif kind == "Z":
            out.append(PathCommand("Z"))
            cx, cy = sx, sy
        prev_cubic_cp = None
        prev_quad_cp = None

    return tuple(out)


def _shape_commands(tag: str, attrib: dict) -> tuple[PathCommand, ...]:
    get = lambda name, default=0.0: float(attrib.get(name, default))

    if tag == "line":
        x1, y1, x2, y2 = get("x1"), get("y1"), get("x2"), get("y2")
        return (PathCommand("M", (x1, y1)), PathCommand("L", (x2, y2)))

    if tag == "rect":
        x, y, w, h = get("x"), get("y"), get("width"), get("height")
        if "rx" in attrib or "ry" in attrib:
            log.warning("rect corner radii are ignored")
        if w == 0 or h == 0:
            log.warning("degenerate rect (%.3g x %.3g) reduced to a point", w, h)
            return (PathCommand("M", (x, y)),)
        return (
            PathCommand("M", (x, y)),
            PathCommand("L", (x, y + h)),
            PathCommand("L", (x + w, y + h)),
            PathCommand("L", (x + w, y)),
            PathCommand("Z"),
        )

    if tag in ("circle", "ellipse"):
        cx, cy = get("cx"), get("cy")
        if tag == "circle":
            rx = ry = get("r")
        else:
            rx, ry = get("rx"), get("ry")
        if rx == 0 or ry == 0:
            log.warning("degenerate %s reduced to a point", tag)
            return (PathCommand("M", (cx, cy)),)
        # Four quarter arcs starting at the +x extreme, sweeping positively.
        return (
            PathCommand("M", (cx + rx, cy)),
            PathCommand("A", (rx, ry, 0, 0, 1, cx, cy + ry)),
            PathCommand("A", (rx, ry, 0, 0, 1, cx - rx, cy)),
            PathCommand("A", (rx, ry, 0, 0, 1, cx, cy - ry)),
            PathCommand("A", (rx, ry, 0, 0, 1, cx + rx, cy)),
            PathCommand("Z"),
        )

    if tag in ("polyline", "polygon"):
        nums = [float(t) for t in _NUMBER_RE.findall(attrib.get("points", ""))]
        if len(nums) < 2:
            raise BadPathData("polyline/polygon needs at least one point", 0,
                              attrib.get("points", "")[:8])
        pts = list(zip(nums[0::2], nums[1::2]))
        cmds = [PathCommand("M", pts[0])]
        cmds.extend(PathCommand("L", p) for p in pts[1:])
        if tag == "polygon":
            cmds.append(PathCommand("Z"))
        return tuple(cmds)

    raise UnsupportedSvgFeature(tag)


def shape_to_path(element: ET.Element) -> NormalizedPath:
    """Convert a basic-shape element to an equivalent path record."""
    tag = _local_tag(element)
    if tag not in _SHAPE_TAGS:
        raise UnsupportedSvgFeature(tag)
    style = _parse_style(_effective_style({}, element))
    return NormalizedPath(0, _shape_commands(tag, element.attrib), style,
                          _label_of(element, None))


# --- elliptical arcs -------------------------------------------------------

def arc_center_parameters(
    x1: float, y1: float, rx: float, ry: float, rot_deg: float,
    large_arc: float, sweep: float, x2: float, y2: float,
):
    """SVG endpoint parameterization -> (cx, cy, rx, ry, phi, theta1, dtheta).

    Radii are scaled up if too small to span the endpoints. Returns None for
    a zero-radius or zero-length arc (caller degrades to a line).
    """
    if rx == 0 or ry == 0 or (x1 == x2 and y1 == y2):
        return None
    rx, ry = abs(rx), abs(ry)
    phi = math.radians(rot_deg % 360.0)
    cos_p, sin_p = math.cos(phi), math.sin(phi)
    dx, dy = (x1 - x2) / 2.0, (y1 - y2) / 2.0
    x1p = cos_p * dx + sin_p * dy
    y1p = -sin_p * dx + cos_p * dy
    lam = (x1p / rx) ** 2 + (y1p / ry) ** 2
    if lam > 1:
        s = math.sqrt(lam)
        rx, ry = rx * s, ry * s
    num = rx * rx * ry * ry - rx * rx * y1p * y1p - ry * ry * x1p * x1p
    den = rx * rx * y1p * y1p + ry * ry * x1p * x1p
    factor = math.sqrt(max(0.0, num / den))
    if large_arc == sweep:
        factor = -factor
    cxp = factor * rx * y1p / ry
    cyp = -factor * ry * x1p / rx
    cx = cos_p * cxp - sin_p * cyp + (x1 + x2) / 2.0
    cy = sin_p * cxp + cos_p * cyp + (y1 + y2) / 2.0

    def angle(ux, uy, vx, vy):
        dot = ux * vx + uy * vy
        norm = math.hypot(ux, uy) * math.hypot(vx, vy)
        a = math.acos(max(-1.0, min(1.0, dot / norm)))
        if ux * vy - uy * vx < 0:
            a = -a
        return a

    theta1 = angle(1, 0, (x1p - cxp) / rx, (y1p - cyp) / ry)
    dtheta = angle((x1p - cxp) / rx, (y1p - cyp) / ry,
                   (-x1p - cxp) / rx, (-y1p - cyp) / ry)
    if not sweep and dtheta > 0:
        dtheta -= 2 * math.pi
    elif sweep and dtheta < 0:
        dtheta += 2 * math.pi
    return cx, cy, rx, ry, phi, theta1, dtheta


def _arc_point(cx, cy, rx, ry, phi, theta):
    cos_p, sin_p = math.cos(phi), math.sin(phi)
    x = rx * math.cos(theta)
    y = ry * math.sin(theta)
    return (cx + cos_p * x - sin_p * y, cy + sin_p * x + cos_p * y)


def arc_to_cubics(start: tuple[float, float], arc: PathCommand) -> list[PathCommand]:
    """Approximate an A command with at most 8 cubic Bezier segments.

    Needed before baking a non-conformal affine map: a sheared ellipse has no
    A-command representation.
    """
    rx, ry, rot, laf, swf, x2, y2 = arc.params
    params = arc_center_parameters(start[0], start[1], rx, ry, rot, laf, swf, x2, y2)
    if params is None:
        return [PathCommand("L", (x2, y2))]
    cx, cy, rx, ry, phi, theta1, dtheta = params
    n = min(8, max(1, int(math.ceil(abs(dtheta) / (math.pi / 2)))))
    step = dtheta / n
    cos_p, sin_p = math.cos(phi), math.sin(phi)
    out = []
    for i in range(n):
        t0 = theta1 + i * step
        t1 = t0 + step
        # Standard cubic approximation of a unit arc of angle `step`.
        alpha = 4.0 / 3.0 * math.tan((t1 - t0) / 4.0)
        p0 = (math.cos(t0), math.sin(t0))
        p3 = (math.cos(t1), math.sin(t1))
        p1 = (p0[0] - alpha * math.sin(t0), p0[1] + alpha * math.cos(t0))
        p2 = (p3[0] + alpha * math.sin(t1), p3[1] - alpha * math.cos(t1))

        def to_xy(p):
            ex, ey = rx * p[0], ry * p[1]
            return (cx + cos_p * ex - sin_p * ey, cy + sin_p * ex + cos_p * ey)

        c1, c2, end = to_xy(p1), to_xy(p2), to_xy(p3)
        out.append(PathCommand("C", (c1[0], c1[1], c2[0], c2[1], end[0], end[1])))
    # Snap final endpoint to the exact arc target.
    last = out[-1]
    out[-1] = PathCommand("C", last.params[:4] + (x2, y2))
    return out


def _transform_arc(start, arc: PathCommand, mat: AffineTransform2D) -> list[PathCommand]:
    rx, ry, rot, laf, swf, x2, y2 = arc.params
    if mat.is_conformal(1e-9):
        scale = math.sqrt(abs(mat.determinant()))
        extra = math.degrees(math.atan2(mat.b, mat.a))
        nx, ny = mat.apply(x2, y2)
        return [PathCommand("A", (rx * scale, ry * scale, (rot + extra) % 360.0,
                                  laf, swf, nx, ny))]
    cubics = arc_to_cubics(start, arc)
    return [_transform_command(c, mat) for c in cubics]


def _transform_command(cmd: PathCommand, mat: AffineTransform2D) -> PathCommand:
    if cmd.kind == "Z":
        return cmd
    pts = cmd.params
    out = []
    for i in range(0, len(pts), 2):
        out.extend(mat.apply(pts[i], pts[i + 1]))
    return PathCommand(cmd.kind, tuple(out))


def transform_commands(
    commands: Iterable[PathCommand], mat: AffineTransform2D,
) -> tuple[PathCommand, ...]:
    """Bake an affine map into an absolute canonical command sequence."""
    out: list[PathCommand] = []
    cx, cy = 0.0, 0.0
    sx, sy = 0.0, 0.0
    for cmd in commands:
        if cmd.kind == "A":
            out.extend(_transform_arc((cx, cy), cmd, mat))
            cx, cy = cmd.params[5], cmd.params[6]
        elif cmd.kind == "Z":
            out.append(cmd)
            cx, cy = sx, sy
        else:
            out.append(_transform_command(cmd, mat))
            cx, cy = cmd.params[-2], cmd.params[-1]
            if cmd.kind == "M":
                sx, sy = cx, cy
    return tuple(out)


# --- styles ----------------------------------------------------------------

_NAMED_COLORS = {
    "black": (0, 0, 0), "white": (255, 255, 255), "red": (255, 0, 0),
    "green": (0, 128, 0), "lime": (0, 255, 0), "blue": (0, 0, 255),
    "yellow": (255, 255, 0), "cyan": (0, 255, 255), "aqua": (0, 255, 255),
    "magenta": (255, 0, 255), "fuchsia": (255, 0, 255), "gray": (128, 128, 128),
    "grey": (128, 128, 128), "silver": (192, 192, 192), "maroon": (128, 0, 0),
    "olive": (128, 128, 0), "navy": (0, 0, 128), "purple": (128, 0, 128),
    "teal": (0, 128, 128), "orange": (255, 165, 0), "brown": (165, 42, 42),
}

_STYLE_PROPS = ("fill", "stroke", "stroke-width")


def parse_color(value: str) -> Optional[tuple[float, float, float]]:
    """Parse a CSS color to RGB in [0,1]; None if unparsable."""
    v = value.strip().lower()
    if v in _NAMED_COLORS:
        r, g, b = _NAMED_COLORS[v]
        return (r / 255.0, g / 255.0, b / 255.0)
    if v.startswith("#"):
        hexpart = v[1:]
        if len(hexpart) == 3:
            hexpart = "".join(ch * 2 for ch in hexpart)
        if len(hexpart) == 6:
            try:
                return tuple(int(hexpart[i:i + 2], 16) / 255.0 for i in (0, 2, 4))
            except ValueError:
                return None
        return None
    m = re.match(r"rgb\(\s*([^)]+)\)", v)
    if m:
        parts = [p.strip() for p in m.group(1).split(",")]
        if len(parts) != 3:
            return None
        vals = []
        for p in parts:
            if p.endswith("%"):
                vals.append(float(p[:-1]) / 100.0)
            else:
                vals.append(float(p) / 255.0)
        return tuple(min(1.0, max(0.0, x)) for x in vals)
    return None


def _effective_style(inherited: dict, element: ET.Element) -> dict:
    """Merge presentation attributes and inline style onto the inherited
    context; inline style wins over presentation attributes."""
    style = dict(inherited)
    for prop in _STYLE_PROPS:
        if prop in element.attrib:
            style[prop] = element.attrib[prop]
    inline = element.attrib.get("style")
    if inline:
        for decl in inline.split(";"):
            if ":" not in decl:
                continue
            name, _, value = decl.partition(":")
            name = name.strip().lower()
            if name in _STYLE_PROPS:
                style[name] = value.strip()
    return style


def _parse_style(style: dict, width_scale: float = 1.0) -> StyleAttributes:
    fill = style.get("fill")
    has_fill = True if fill is None else fill.strip().lower() != "none"

    stroke = style.get("stroke")
    rgb = (0.0, 0.0, 0.0)
    if stroke is not None and stroke.strip().lower() not in ("none", ""):
        parsed = parse_color(stroke)
        if parsed is None:
            log.warning("unparsable stroke color %r, defaulting to black", stroke)
        else:
            rgb = parsed

    width = 1.0
    raw_width = style.get("stroke-width")
    if raw_width is not None:
        m = _NUMBER_RE.match(raw_width.strip())
        if m:
            width = float(m.group(0))
            unit = raw_width.strip()[m.end():].strip()
            if unit and unit != "px":
                log.warning("stroke-width unit %r ignored", unit)
        else:
            log.warning("unparsable stroke-width %r, defaulting to 1", raw_width)
    width = max(0.0, width * width_scale)
    return StyleAttributes(has_fill, rgb, width)


# --- document parsing and flattening ---------------------------------------

def _local_tag(element: ET.Element) -> str:
    tag = element.tag
    if isinstance(tag, str) and tag.startswith("{"):
        ns, _, local = tag[1:].partition("}")
        if "svg" not in ns:
            return "{foreign}" + local
        return local
    return tag if isinstance(tag, str) else ""


def _validate_tree(element: ET.Element, ignored: list[str]):
    tag = _local_tag(element)
    if tag.startswith("{foreign}"):
        ignored.append(tag[len("{foreign}"):])
        return
    if tag in _IGNORED_TAGS:
        ignored.append(tag)
        return
    if tag not in _CONTAINER_TAGS and tag not in _SHAPE_TAGS and tag != "path":
        raise UnsupportedSvgFeature(tag)
    for child in element:
        _validate_tree(child, ignored)


def parse_svg(data: bytes | str, source_id: str = "<bytes>") -> RawSvgDocument:
    """Parse SVG markup into a validated document.

    Raises MalformedMarkup on XML errors and UnsupportedSvgFeature for
    elements outside the supported subset. Text, defs and document metadata
    are recorded as ignored.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedMarkup(str(exc), getattr(exc, "position", None)) from None
    if _local_tag(root) != "svg":
        raise MalformedMarkup(f"root element is <{_local_tag(root)}>, expected <svg>")
    ignored: list[str] = []
    _validate_tree(root, ignored)
    for tag in ignored:
        log.info("%s: ignoring <%s> element", source_id, tag)

    viewbox = None
    raw_vb = root.attrib.get("viewBox")
    if raw_vb:
        nums = [float(t) for t in _NUMBER_RE.findall(raw_vb)]
        if len(nums) == 4:
            viewbox = tuple(nums)
        else:
            log.warning("%s: malformed viewBox %r ignored", source_id, raw_vb)
    return RawSvgDocument(source_id, root, viewbox, ignored)


_TRANSFORM_RE = re.compile(r"([a-zA-Z]+)\s*\(([^)]*)\)")


def parse_transform(text: Optional[str]) -> AffineTransform2D:
    """Parse a transform attribute into a single composed affine map."""
    mat = AffineTransform2D.identity()
    if not text:
        return mat
    leftover = _TRANSFORM_RE.sub("", text).strip(" \t\r\n,")
    if leftover:
        raise UnsupportedTransformKind(leftover)
    for m in _TRANSFORM_RE.finditer(text):
        name = m.group(1).lower()
        args = [float(t) for t in _NUMBER_RE.findall(m.group(2))]
        if name == "matrix" and len(args) == 6:
            part = AffineTransform2D(*args)
        elif name == "translate" and 1 <= len(args) <= 2:
            part = AffineTransform2D.translation(args[0], args[1] if len(args) > 1 else 0.0)
        elif name == "scale" and 1 <= len(args) <= 2:
            part = AffineTransform2D.scaling(args[0], args[1] if len(args) > 1 else None)
        elif name == "rotate" and len(args) in (1, 3):
            part = AffineTransform2D.rotation(*args)
        elif name == "skewx" and len(args) == 1:
            part = AffineTransform2D(1, 0, math.tan(math.radians(args[0])), 1, 0, 0)
        elif name == "skewy" and len(args) == 1:
            part = AffineTransform2D(1, math.tan(math.radians(args[0])), 0, 1, 0, 0)
        else:
            raise UnsupportedTransformKind(f"{m.group(1)}({m.group(2)})")
        mat = mat.compose(part)
    return mat


# Attributes consulted (in order) for label provenance.
LABEL_ATTRS = ("data-layer", "layer", "{http://www.inkscape.org/namespaces/inkscape}label")


def _label_of(element: ET.Element, inherited: Optional[str]) -> Optional[str]:
    for attr in LABEL_ATTRS:
        value = element.attrib.get(attr)
        if value:
            return value
    return inherited


def flatten_transforms(doc: RawSvgDocument) -> list[NormalizedPath]:
    """Dissolve groups, bake transforms, and emit paths in document order."""
    paths: list[NormalizedPath] = []

    def walk(element: ET.Element, ctm: AffineTransform2D, style_ctx: dict,
             layer: Optional[str]):
        tag = _local_tag(element)
        if tag.startswith("{foreign}") or tag in _IGNORED_TAGS:
            return
        mat = ctm.compose(parse_transform(element.attrib.get("transform")))
        style_ctx = _effective_style(style_ctx, element)
        layer = _label_of(element, layer)
        if tag in _CONTAINER_TAGS:
            for child in element:
                walk(child, mat, style_ctx, layer)
            return
        if tag == "path":
            commands = canonicalize_commands(element.attrib.get("d", ""))
        else:
            commands = _shape_commands(tag, element.attrib)
        width_scale = math.sqrt(abs(mat.determinant()))
        if not mat.is_identity():
            commands = transform_commands(commands, mat)
        style = _parse_style(style_ctx, width_scale)
        paths.append(NormalizedPath(len(paths), commands, style, layer))

    walk(doc.root, AffineTransform2D.identity(), {}, None)
    return paths


def load_svg_paths(source, source_id: Optional[str] = None) -> list[NormalizedPath]:
    """Convenience: read an SVG (file path, markup string, or bytes) and
    return its flattened paths."""
    if isinstance(source, bytes) or (isinstance(source, str) and "<" in source):
        data = source
        sid = source_id or "<bytes>"
    else:
        with open(source, "rb") as fh:
            data = fh.read()
        sid = source_id or str(source)
    return flatten_transforms(parse_svg(data, sid))


def write_flat_svg(paths: Sequence[NormalizedPath], viewbox=None) -> str:
    """Render paths as a flat SVG document: one <path> per record, no groups.

    Style and label provenance round-trip, so the output can be fed back
    into the graph builder.
    """
    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    vb = f' viewBox="{" ".join(f"{v:.9g}" for v in viewbox)}"' if viewbox else ""
    lines.append(f'<svg xmlns="http://www.w3.org/2000/svg"{vb}>')
    for p in paths:
        r, g, b = p.style.stroke_rgb
        fill = "#000000" if p.style.has_fill else "none"
        style = (f"fill:{fill};stroke:rgb({r * 100:.9g}%,{g * 100:.9g}%,{b * 100:.9g}%);"
                 f"stroke-width:{p.style.stroke_width:.9g}")
        layer = f' data-layer="{_xml_escape(p.source_layer)}"' if p.source_layer else ""
        lines.append(f'  <path style="{style}" d="{p.d_string()}"{layer}/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _xml_escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def apply_affine(path: NormalizedPath, mat: AffineTransform2D,
                 scale_stroke: bool = False) -> NormalizedPath:
    """Return a copy of `path` with `mat` baked into its geometry."""
    style = path.style
    if scale_stroke:
        style = replace(style, stroke_width=style.stroke_width
                        * math.sqrt(abs(mat.determinant())))
    return replace(path, commands=transform_commands(path.commands, mat), style=style)
