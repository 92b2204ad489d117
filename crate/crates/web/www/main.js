import init, { partition, pca_box, simulate } from "./pkg/mpc_cert_web.js";

const $ = (id) => document.getElementById(id);

// Maps data coordinates in [lo, hi]^2 onto a canvas.
function view(canvas, lo, hi) {
  const s = canvas.width / (hi - lo);
  return {
    x: (v) => (v - lo) * s,
    y: (v) => canvas.height - (v - lo) * s,
    inv: (px, py) => [px / s + lo, (canvas.height - py) / s + lo],
  };
}

function polygon(ctx, v, pts) {
  ctx.beginPath();
  pts.forEach(([a, b], i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, v.x(a), v.y(b)));
  ctx.closePath();
}

function runPartition() {
  const canvas = $("part");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let res;
  try {
    res = JSON.parse(partition(+$("n").value, +$("umax").value));
  } catch (e) {
    $("part-out").textContent = String(e);
    return;
  }
  const v = view(canvas, -5, 5);
  const top = Math.max(1, res.max_iterations);
  for (const r of res.regions) {
    const shade = 230 - Math.round((170 * r.iterations) / top);
    ctx.fillStyle = `rgb(${shade}, ${shade}, 255)`;
    polygon(ctx, v, r.vertices);
    ctx.fill();
    ctx.stroke();
  }
  $("part-out").textContent =
    `${res.regions.length} regions, at most ${res.max_iterations} iterations` +
    (res.complete ? "" : " (some regions hit the iteration cap)");
}

const points = [];
const pv = view($("pts"), -5, 5);

function drawPoints(corners) {
  const ctx = $("pts").getContext("2d");
  ctx.clearRect(0, 0, 420, 420);
  ctx.fillStyle = "black";
  for (const [a, b] of points) ctx.fillRect(pv.x(a) - 2, pv.y(b) - 2, 4, 4);
  if (corners) {
    ctx.strokeStyle = "crimson";
    polygon(ctx, pv, corners);
    ctx.stroke();
    ctx.strokeStyle = "black";
  }
}

function runPca() {
  try {
    const res = JSON.parse(pca_box(JSON.stringify(points), +$("delta").value));
    drawPoints(res.corners);
    $("pca-out").textContent =
      `${res.inside} of ${points.length} points inside, area ${res.area.toFixed(3)}`;
  } catch (e) {
    $("pca-out").textContent = String(e);
  }
}

function runSim() {
  $("sim-out").textContent = "running...";
  setTimeout(() => {
    let res;
    try {
      res = JSON.parse(simulate($("traj").value, +$("dur").value, +$("r").value, 0));
    } catch (e) {
      $("sim-out").textContent = String(e);
      return;
    }
    const canvas = $("trace");
    const ctx = canvas.getContext("2d");
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const rows = res.rows;
    const tmax = rows[rows.length - 1][0] || 1;
    let lo = Infinity, hi = -Infinity;
    for (const r of rows) for (const v of r.slice(1)) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
    const pad = 0.05 * (hi - lo || 1);
    lo -= pad; hi += pad;
    const px = (t) => (t / tmax) * canvas.width;
    const py = (v) => canvas.height - ((v - lo) / (hi - lo)) * canvas.height;
    const colors = ["#d33", "#3a3", "#33d"];
    for (let k = 0; k < 3; k++) {
      for (const [col, dash] of [[k + 1, []], [k + 4, [4, 4]]]) {
        ctx.strokeStyle = colors[k];
        ctx.setLineDash(dash);
        ctx.beginPath();
        rows.forEach((r, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, px(r[0]), py(r[col])));
        ctx.stroke();
      }
    }
    ctx.setLineDash([]);
    const [ex, ey, ez] = res.rms_error.map((v) => v.toFixed(4));
    $("sim-out").textContent =
      `x red, y green, z blue; dashed is the reference\n` +
      `RMS error x ${ex} y ${ey} z ${ez} m, at most ${res.max_iterations} iterations ` +
      `(${res.max_flops} flops) per solve`;
  }, 10);
}

await init();
$("certify").onclick = runPartition;
$("pca").onclick = runPca;
$("clear").onclick = () => { points.length = 0; drawPoints(); $("pca-out").textContent = ""; };
$("pts").onclick = (e) => {
  const rect = e.target.getBoundingClientRect();
  points.push(pv.inv(e.clientX - rect.left, e.clientY - rect.top));
  drawPoints();
};
$("sim").onclick = runSim;
runPartition();
