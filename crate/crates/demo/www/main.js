import init, { potential_field, pairing_curve, FlowDemo } from "./pkg/nshomog_demo.js";

function paint(canvas, values, res) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(res, res);
  let m = 1e-12;
  for (const v of values) m = Math.max(m, Math.abs(v));
  for (let j = 0; j < res * res; j++) {
    const x = values[j] / m;
    const row = res - 1 - Math.floor(j / res);
    const o = 4 * (row * res + (j % res));
    img.data[o] = x > 0 ? 255 : Math.round(255 * (1 + x));
    img.data[o + 1] = Math.round(255 * (1 - Math.abs(x)));
    img.data[o + 2] = x < 0 ? 255 : Math.round(255 * (1 - x));
    img.data[o + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
}

function drawMedium() {
  const n = +document.getElementById("pn").value;
  document.getElementById("pn-v").textContent = n;
  const seed = +document.getElementById("pseed").value;
  paint(document.getElementById("medium"), potential_field(n, 128, seed), 128);
}

function drawPairing() {
  const canvas = document.getElementById("pairing");
  const ctx = canvas.getContext("2d");
  const errs = pairing_curve(24, 1);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const lo = -16, hi = 1;
  const w = canvas.width / errs.length;
  errs.forEach((e, i) => {
    const l = Math.max(lo, Math.log10(e + 1e-300));
    const h = (canvas.height - 20) * (l - lo) / (hi - lo);
    ctx.fillStyle = l <= lo ? "#ccc" : "#36c";
    ctx.fillRect(i * w + 2, canvas.height - 20 - h, w - 4, Math.max(h, 1));
    ctx.fillStyle = "#000";
    ctx.fillText(String(i + 1), i * w + 4, canvas.height - 6);
  });
}

let flow = null;
let playing = true;

function restart() {
  const n = +document.getElementById("fn").value;
  const seed = +document.getElementById("fseed").value;
  const eff = document.getElementById("feff").checked;
  flow = new FlowDemo(n, seed, eff);
}

function tick() {
  if (playing && flow) {
    try {
      flow.step(8);
    } catch (e) {
      document.getElementById("fstat").textContent = String(e);
      playing = false;
    }
    paint(document.getElementById("flow"), flow.vorticity(64), 64);
    document.getElementById("fstat").textContent =
      `t = ${flow.time().toFixed(3)}   ‖u‖² = ${flow.energy().toFixed(4)}`;
  }
  requestAnimationFrame(tick);
}

await init();
for (const id of ["pn", "pseed"]) document.getElementById(id).addEventListener("input", drawMedium);
document.getElementById("frestart").addEventListener("click", restart);
document.getElementById("fplay").addEventListener("click", (ev) => {
  playing = !playing;
  ev.target.textContent = playing ? "pause" : "play";
});
drawMedium();
drawPairing();
restart();
tick();
