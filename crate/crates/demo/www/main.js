import init, { targets, klSplit, BlobLab } from "./pkg/unlearn_demo.js";

const NUM_CLASSES = 6;
const PER_CLASS = 200;
const GRID = 80;
const COLORS = ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#bfef45", "#469990", "#9a6324"];

const $ = (id) => document.getElementById(id);
const numbers = (s) => s.split(",").map((x) => x.trim()).filter((x) => x !== "").map(Number);

function fail(el, e) {
  el.innerHTML = `<span class="err">${e.message ?? e}</span>`;
}

function showTargets() {
  const el = $("targets");
  try {
    const z = new Float64Array(numbers($("logits").value));
    const rows = targets(z, Number($("u").value), Number($("alpha").value), Number($("temp").value));
    const k = z.length;
    const names = ["teacher", "delete", "alpha", "temp"];
    let html = "<table><tr><th></th>" + [...Array(k).keys()].map((i) => `<th>${i}</th>`).join("") + "</tr>";
    names.forEach((name, r) => {
      html += `<tr><td>${name}</td>`;
      for (let i = 0; i < k; i++) {
        const p = rows[r * k + i];
        html += `<td>${p.toFixed(3)} <span class="bar" style="width:${Math.round(p * 60)}px"></span></td>`;
      }
      html += "</tr>";
    });
    el.innerHTML = html + "</table>";
  } catch (e) {
    fail(el, e);
  }
}

function showKl() {
  const el = $("kl");
  try {
    const [f, r, t] = klSplit(new Float64Array(numbers($("klp").value)), new Float64Array(numbers($("klq").value)), Number($("klu").value));
    el.textContent = `forget ${f.toExponential(4)} + retention ${r.toExponential(4)} = ${(f + r).toExponential(6)}; KL ${t.toExponential(6)}`;
  } catch (e) {
    fail(el, e);
  }
}

function draw(canvas, lab) {
  const ctx = canvas.getContext("2d");
  const map = lab.decisionMap(GRID);
  const cell = canvas.width / GRID;
  for (let r = 0; r < GRID; r++) {
    for (let c = 0; c < GRID; c++) {
      ctx.fillStyle = COLORS[map[r * GRID + c] % COLORS.length] + "55";
      ctx.fillRect(c * cell, r * cell, cell, cell);
    }
  }
  const [x0, x1, y0, y1] = lab.bounds();
  const pts = lab.points();
  for (let i = 0; i < pts.length; i += 3) {
    ctx.fillStyle = COLORS[pts[i + 2] % COLORS.length];
    const px = ((pts[i] - x0) / (x1 - x0)) * canvas.width;
    const py = ((y1 - pts[i + 1]) / (y1 - y0)) * canvas.height;
    ctx.fillRect(px - 1, py - 1, 2, 2);
  }
}

async function main() {
  await init();
  for (const id of ["logits", "u", "alpha", "temp"]) $(id).addEventListener("input", showTargets);
  for (const id of ["klp", "klq", "klu"]) $(id).addEventListener("input", showKl);
  showTargets();
  showKl();

  $("scores").textContent = "training the original model...";
  await new Promise((r) => setTimeout(r, 0));
  const lab = new BlobLab(NUM_CLASSES, PER_CLASS, 0.5, 0n);
  draw($("before"), lab);
  draw($("after"), lab);
  $("scores").textContent = "";

  $("run").addEventListener("click", () => {
    try {
      const forget = new Uint32Array(numbers($("forget").value));
      const [ft, rt, oft, ort] = lab.forget(forget, $("method").value, Number($("lr").value), Number($("epochs").value));
      $("scores").textContent =
        `forget-test accuracy ${oft.toFixed(1)}% → ${ft.toFixed(1)}%, ` +
        `remain-test accuracy ${ort.toFixed(1)}% → ${rt.toFixed(1)}%`;
      draw($("after"), lab);
    } catch (e) {
      fail($("scores"), e);
    }
  });
  $("reset").addEventListener("click", () => {
    lab.reset();
    $("scores").textContent = "";
    draw($("after"), lab);
  });
}

main();
