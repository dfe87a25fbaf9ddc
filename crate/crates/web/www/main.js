import init, { latticeField, butterfly, interactionCurves } from "./pkg/phasecrystal_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guarded(errId, f) {
  return () => {
    $(errId).textContent = "";
    try {
      f();
    } catch (e) {
      $(errId).textContent = e.message ?? String(e);
    }
  };
}

// diverging blue-white-red map for values in [-1, 1]
function colour(v) {
  const t = Math.max(-1, Math.min(1, v));
  const a = Math.round(255 * (1 - Math.abs(t)));
  return t > 0 ? [255, a, a] : [a, a, 255];
}

function drawLattice() {
  const canvas = $("l-canvas");
  const n = canvas.width;
  const field = latticeField(0.1, num("l-q0"), num("l-lambda"), num("l-half"), n);
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  for (let j = 0; j < n; j++) {
    for (let i = 0; i < n; i++) {
      // P increases upwards
      const [r, g, b] = colour(field[j * n + i]);
      const o = 4 * ((n - 1 - j) * n + i);
      img.data.set([r, g, b, 255], o);
    }
  }
  ctx.putImageData(img, 0, 0);
}

function drawButterfly() {
  const canvas = $("b-canvas");
  const ctx = canvas.getContext("2d");
  const k = num("b-k");
  if (k === 0) throw new Error("K must be nonzero");
  const flat = butterfly(num("b-q"), k, 8);
  const { width: w, height: h } = canvas;
  const ey = (e) => h / 2 - (e / Math.abs(k)) * (h / 2 - 4);
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#222";
  for (let t = 0; t < flat.length; t += 3) {
    const x = flat[t] * (w - 4) + 2;
    const y0 = ey(flat[t + 2]);
    const y1 = ey(flat[t + 1]);
    ctx.fillRect(x - 1, y0, 2, Math.max(1, y1 - y0));
  }
}

function drawInteraction() {
  const canvas = $("i-canvas");
  const ctx = canvas.getContext("2d");
  const rMax = num("i-r");
  const flat = interactionCurves($("i-kind").value, num("i-s"), num("i-lambda"), rMax, 300);
  const { width: w, height: h } = canvas;
  let lo = 0;
  let hi = 0;
  for (let t = 0; t < flat.length; t += 3) {
    lo = Math.min(lo, flat[t + 1], flat[t + 2]);
    hi = Math.max(hi, flat[t + 1], flat[t + 2]);
  }
  const span = hi - lo || 1;
  const px = (r) => 30 + (r / rMax) * (w - 40);
  const py = (u) => h - 20 - ((u - lo) / span) * (h - 40);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(px(0), py(0));
  ctx.lineTo(px(rMax), py(0));
  ctx.stroke();
  for (const [col, off, dash] of [["#c33", 1, []], ["#36c", 2, [5, 4]]]) {
    ctx.strokeStyle = col;
    ctx.setLineDash(dash);
    ctx.beginPath();
    for (let t = 0; t < flat.length; t += 3) {
      const f = t === 0 ? "moveTo" : "lineTo";
      ctx[f](px(flat[t]), py(flat[t + off]));
    }
    ctx.stroke();
  }
  ctx.setLineDash([]);
  ctx.fillStyle = "#c33";
  ctx.fillText("U_c", w - 60, 16);
  ctx.fillStyle = "#36c";
  ctx.fillText("U_e", w - 30, 16);
}

await init();
$("l-go").onclick = guarded("l-err", drawLattice);
$("b-go").onclick = guarded("b-err", drawButterfly);
$("i-go").onclick = guarded("i-err", drawInteraction);
for (const b of ["l-go", "b-go", "i-go"]) $(b).click();
