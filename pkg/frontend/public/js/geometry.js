/** Pure stroke geometry: capture thinning, validation, coordinate mapping,
 * and arrowhead construction for the overlay. */
/** Minimum spacing kept between consecutive captured points, in px. */
export const MIN_SPACING = 2;
export function distance(a, b) {
    return Math.hypot(b.x - a.x, b.y - a.y);
}
/**
 * Append a pointer sample to a path, keeping the >= MIN_SPACING invariant.
 * Returns true when the point was kept.
 */
export function appendThinned(points, p, minSpacing = MIN_SPACING) {
    if (points.length === 0) {
        points.push(p);
        return true;
    }
    if (distance(points[points.length - 1], p) >= minSpacing) {
        points.push(p);
        return true;
    }
    return false;
}
/** Thin a whole captured path at once (same rule as appendThinned). */
export function thinPath(raw, minSpacing = MIN_SPACING) {
    const out = [];
    for (const p of raw) {
        appendThinned(out, p, minSpacing);
    }
    return out;
}
/** A stroke is submittable once it has at least two (thinned) points. */
export function strokeIsValid(points) {
    return points.length >= 2;
}
/** Display-canvas coordinates -> model-canvas coordinates. */
export function displayToModel(p, scale) {
    return { x: p.x / scale, y: p.y / scale };
}
/** Model-canvas coordinates -> display-canvas coordinates. */
export function modelToDisplay(p, scale) {
    return { x: p.x * scale, y: p.y * scale };
}
/**
 * Two wing points for an arrowhead at the end of a segment, swept back from
 * the tip at +-30 degrees. Returns null for a degenerate (zero-length) segment.
 */
export function arrowHead(from, to, size = 10) {
    const dx = to.x - from.x;
    const dy = to.y - from.y;
    const len = Math.hypot(dx, dy);
    if (len === 0) {
        return null;
    }
    const angle = Math.atan2(dy, dx);
    const spread = Math.PI / 6;
    return {
        tip: to,
        left: {
            x: to.x - size * Math.cos(angle - spread),
            y: to.y - size * Math.sin(angle - spread),
        },
        right: {
            x: to.x - size * Math.cos(angle + spread),
            y: to.y - size * Math.sin(angle + spread),
        },
    };
}
