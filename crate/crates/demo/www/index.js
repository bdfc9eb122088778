import init, {
  repeated_pool_picks,
  estimator_convergence,
  learning_curves,
} from "./pkg/batchbald_demo.js";

const COLORS = { batchbald: "#26c", bald: "#d33", random: "#777" };

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function call(fn, ...args) {
  const out = JSON.parse(fn(...args));
  if (out.error) throw new Error(out.error);
  return out;
}

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "12px system-ui, sans-serif";
  return ctx;
}

function showError(canvas, err) {
  const ctx = clear(canvas);
  ctx.fillStyle = "#d33";
  ctx.fillText(String(err.message || err), 10, 20);
}

// Axes with a plot area inset by `pad`; returns coordinate mappers.
function axes(ctx, canvas, { xmin, xmax, ymin, ymax, xlog = false, xlabel, ylabel }) {
  const pad = { l: 50, r: 15, t: 10, b: 35 };
  const w = canvas.width - pad.l - pad.r;
  const h = canvas.height - pad.t - pad.b;
  const fx = xlog ? Math.log10 : (v) => v;
  const x = (v) => pad.l + ((fx(v) - fx(xmin)) / (fx(xmax) - fx(xmin))) * w;
  const y = (v) => pad.t + h - ((v - ymin) / (ymax - ymin)) * h;
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad.l, pad.t);
  ctx.lineTo(pad.l, pad.t + h);
  ctx.lineTo(pad.l + w, pad.t + h);
  ctx.stroke();
  ctx.fillStyle = "#444";
  for (let i = 0; i <= 4; i++) {
    const v = ymin + ((ymax - ymin) * i) / 4;
    ctx.fillText(v.toFixed(2), 5, y(v) + 4);
  }
  ctx.fillText(xlabel, pad.l + w / 2 - 30, canvas.height - 5);
  ctx.save();
  ctx.translate(12, pad.t + h / 2 + 30);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylabel, 0, 0);
  ctx.restore();
  return { x, y, pad, w, h };
}

function drawPicks() {
  const canvas = $("p-canvas");
  try {
    const r = call(repeated_pool_picks, num("p-rep"), num("p-b"), num("p-seed"));
    const order = r.pool_features
      .map((f, i) => ({ f, i, s: r.bald_scores[i] }))
      .sort((a, b) => a.f - b.f || a.i - b.i);
    const ctx = clear(canvas);
    const max = Math.max(...r.bald_scores, 1e-9);
    const { x, y } = axes(ctx, canvas, {
      xmin: 0, xmax: order.length, ymin: 0, ymax: max * 1.15,
      xlabel: "pool points, grouped by feature bucket", ylabel: "BALD score",
    });
    const bw = Math.max(1, x(1) - x(0) - 1);
    const bald = new Set(r.bald.indices);
    const bb = new Set(r.batchbald.indices);
    order.forEach((p, pos) => {
      // Alternate shades mark bucket boundaries.
      ctx.fillStyle = p.f % 2 ? "#c8c8c8" : "#e0e0e0";
      ctx.fillRect(x(pos), y(p.s), bw, y(0) - y(p.s));
      if (bald.has(p.i)) {
        ctx.fillStyle = COLORS.bald;
        ctx.fillRect(x(pos), y(p.s) - 12, bw, 8);
      }
      if (bb.has(p.i)) {
        ctx.fillStyle = COLORS.batchbald;
        ctx.beginPath();
        ctx.moveTo(x(pos) + bw / 2, y(p.s) - 26);
        ctx.lineTo(x(pos), y(p.s) - 16);
        ctx.lineTo(x(pos) + bw, y(p.s) - 16);
        ctx.fill();
      }
    });
    const fmt = (s) => r[s].scores.map((v) => v.toFixed(3)).join(", ");
    $("p-out").textContent =
      `BALD       buckets [${r.bald.features}]  scores [${fmt("bald")}]\n` +
      `BatchBALD  buckets [${r.batchbald.features}]  cumulative [${fmt("batchbald")}]`;
  } catch (e) {
    showError(canvas, e);
  }
}

function drawConvergence() {
  const canvas = $("m-canvas");
  try {
    const r = call(estimator_convergence, num("m-n"), num("m-c"), num("m-k"), num("m-s"), 7);
    const all = r.runs.flatMap((run) => run.estimates).concat([r.exact]);
    const lo = Math.min(...all), hi = Math.max(...all);
    const span = Math.max(hi - lo, 1e-3);
    const ctx = clear(canvas);
    const ms = r.runs.map((run) => run.m);
    const { x, y } = axes(ctx, canvas, {
      xmin: ms[0] / 1.5, xmax: ms[ms.length - 1] * 1.5, xlog: true,
      ymin: lo - 0.1 * span, ymax: hi + 0.1 * span,
      xlabel: "sampled configurations m (log scale)", ylabel: "joint entropy (nats)",
    });
    ctx.strokeStyle = "#2a2";
    ctx.beginPath();
    ctx.moveTo(x(ms[0] / 1.5), y(r.exact));
    ctx.lineTo(x(ms[ms.length - 1] * 1.5), y(r.exact));
    ctx.stroke();
    ctx.fillStyle = "#444";
    for (const run of r.runs) {
      ctx.fillText(String(run.m), x(run.m) - 10, canvas.height - 20);
      for (const e of run.estimates) {
        ctx.beginPath();
        ctx.arc(x(run.m), y(e), 2.5, 0, 2 * Math.PI);
        ctx.fill();
      }
    }
  } catch (e) {
    showError(canvas, e);
  }
}

function drawCurves() {
  const canvas = $("c-canvas");
  $("c-status").textContent = "running...";
  // Let the status text paint before the synchronous run blocks the page.
  setTimeout(() => {
    try {
      const r = call(learning_curves, num("c-t"), num("c-rep"), num("c-r"), num("c-seed"));
      const series = Object.entries(r);
      const acc = series.flatMap(([, v]) => v.accuracy);
      const labels = series[0][1].labels;
      const ctx = clear(canvas);
      const { x, y } = axes(ctx, canvas, {
        xmin: 0, xmax: labels[labels.length - 1],
        ymin: Math.max(0, Math.min(...acc) - 0.05), ymax: Math.min(1, Math.max(...acc) + 0.05),
        xlabel: "acquired labels", ylabel: "test accuracy",
      });
      for (const [name, v] of series) {
        ctx.strokeStyle = COLORS[name];
        ctx.lineWidth = 2;
        ctx.beginPath();
        v.accuracy.forEach((a, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, x(v.labels[i]), y(a)));
        ctx.stroke();
      }
      ctx.lineWidth = 1;
      $("c-status").textContent = "";
    } catch (e) {
      $("c-status").textContent = "";
      showError(canvas, e);
    }
  }, 20);
}

await init();
$("p-run").addEventListener("click", drawPicks);
$("m-run").addEventListener("click", drawConvergence);
$("c-run").addEventListener("click", drawCurves);
drawPicks();
drawConvergence();
