/** Canvas rendering for the stroke overlay. Functions take a structural
 * subset of CanvasRenderingContext2D so tests can pass a recording stub. */
import { arrowHead } from "./geometry.js";
export const STROKE_COLORS = [
    "#ff5252",
    "#40c4ff",
    "#ffd740",
    "#69f0ae",
    "#e040fb",
    "#ffab40",
    "#18ffff",
    "#b2ff59",
];
export function strokeColor(slot) {
    return STROKE_COLORS[slot % STROKE_COLORS.length];
}
/** Draw one stroke as a polyline with an arrowhead on its final segment. */
export function drawStroke(ctx, stroke, arrowSize = 10) {
    const pts = stroke.points;
    if (pts.length === 0) {
        return;
    }
    const color = strokeColor(stroke.color);
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.lineWidth = 2;
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    ctx.beginPath();
    ctx.moveTo(pts[0].x, pts[0].y);
    for (let i = 1; i < pts.length; i++) {
        ctx.lineTo(pts[i].x, pts[i].y);
    }
    ctx.stroke();
    if (pts.length < 2) {
        return;
    }
    const head = arrowHead(pts[pts.length - 2], pts[pts.length - 1], arrowSize);
    if (head !== null) {
        ctx.beginPath();
        ctx.moveTo(head.left.x, head.left.y);
        ctx.lineTo(head.tip.x, head.tip.y);
        ctx.lineTo(head.right.x, head.right.y);
        ctx.closePath();
        ctx.fill();
    }
}
export function drawStrokes(ctx, strokes) {
    for (const stroke of strokes) {
        drawStroke(ctx, stroke);
    }
}
