import init, { simulate_hazards, biasing_functions, analyze_csv } from "./pkg/dthazard_web.js";

const COLORS = { truth: "#000", monte_carlo: "#888", np: "#d62728", sp: "#1f77b4", naive: "#2ca02c" };

function plot(section, grid, series) {
  const canvas = section.querySelector("canvas");
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);

  const shown = Object.entries(series).filter(([, v]) => Array.isArray(v));
  const ys = shown.flatMap(([, v]) => v).filter(Number.isFinite);
  if (!ys.length) return;
  const pad = { l: 50, r: 10, t: 10, b: 30 };
  const x0 = grid[0], x1 = grid[grid.length - 1];
  let y0 = Math.min(0, ...ys), y1 = Math.max(...ys);
  if (y1 <= y0) y1 = y0 + 1;
  const px = (x) => pad.l + ((x - x0) / (x1 - x0)) * (w - pad.l - pad.r);
  const py = (y) => h - pad.b - ((y - y0) / (y1 - y0)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad.l, pad.t);
  ctx.lineTo(pad.l, h - pad.b);
  ctx.lineTo(w - pad.r, h - pad.b);
  ctx.stroke();
  for (let i = 0; i <= 4; i++) {
    const xv = x0 + (i / 4) * (x1 - x0), yv = y0 + (i / 4) * (y1 - y0);
    ctx.fillText(xv.toPrecision(3), px(xv) - 12, h - pad.b + 15);
    ctx.fillText(yv.toPrecision(3), 4, py(yv) + 4);
  }

  for (const [name, values] of shown) {
    ctx.strokeStyle = COLORS[name] || "#9467bd";
    ctx.lineWidth = name === "truth" ? 2 : 1.5;
    ctx.setLineDash(name === "monte_carlo" ? [4, 3] : []);
    ctx.beginPath();
    let pen = false;
    values.forEach((y, i) => {
      if (!Number.isFinite(y)) { pen = false; return; }
      const X = px(grid[i]), Y = py(Math.min(y, y1));
      pen ? ctx.lineTo(X, Y) : ctx.moveTo(X, Y);
      pen = true;
    });
    ctx.stroke();
  }
  ctx.setLineDash([]);

  section.querySelector(".legend").innerHTML = shown
    .map(([name]) => `<span><i style="background:${COLORS[name] || "#9467bd"}"></i>${name}</span>`)
    .join("");
}

function status(section, text, isError = false) {
  const el = section.querySelector(".status");
  el.textContent = text;
  el.classList.toggle("error", isError);
}

function describe(name, est) {
  if (est.error) return `${name}: ${est.error}`;
  const parts = [`${name}:`];
  if (est.h != null) parts.push(`h = ${est.h.toPrecision(3)}`);
  if (est.ise != null) parts.push(`ISE = ${est.ise.toExponential(3)}`);
  return parts.join(" ");
}

function run(section, work) {
  const form = section.querySelector("form");
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    status(section, "computing...");
    // Let the status repaint before the synchronous wasm call.
    setTimeout(() => {
      const t = performance.now();
      try {
        const lines = work(new FormData(form));
        status(section, `${lines.join("\n")}\n(${((performance.now() - t) / 1000).toFixed(2)} s)`);
      } catch (e) {
        status(section, String(e), true);
      }
    }, 10);
  });
}

const num = (f, k) => Number(f.get(k));

await init();

const sim = document.getElementById("sim");
run(sim, (f) => {
  const r = JSON.parse(simulate_hazards(f.get("model"), num(f, "a"), num(f, "n"), num(f, "seed"), num(f, "h"), f.get("kernel")));
  plot(sim, r.grid, { truth: r.truth, np: r.np.values, sp: r.sp.values, naive: r.naive.values });
  return [`${r.model}, n = ${r.n}, alpha = ${r.alpha.toFixed(4)}`, describe("np", r.np), describe("sp", r.sp), describe("naive", r.naive)];
});

const gfun = document.getElementById("gfun");
run(gfun, (f) => {
  const r = JSON.parse(biasing_functions(f.get("model"), num(f, "a"), num(f, "n"), num(f, "seed")));
  plot(gfun, r.grid, { truth: r.truth, monte_carlo: r.monte_carlo, np: r.np.values, sp: r.sp.values });
  return [r.model, describe("np", r.np), describe("sp", r.sp)];
});

const csv = document.getElementById("csv");
csv.querySelector("input[type=file]").addEventListener("change", async (ev) => {
  const file = ev.target.files[0];
  if (file) csv.querySelector("textarea").value = await file.text();
});
run(csv, (f) => {
  const r = JSON.parse(analyze_csv(f.get("text"), num(f, "shift"), num(f, "scale"), f.get("family"), num(f, "h"), f.get("kernel")));
  if (f.get("show") === "g") {
    plot(csv, r.grid, { np: r.g_np.values, sp: r.g_sp.values });
  } else {
    plot(csv, r.grid, { np: r.np.values, sp: r.sp.values, naive: r.naive.values });
  }
  const ex = r.existence;
  return [
    `n = ${r.n}` + (r.tau != null ? `, tau = ${r.tau.toPrecision(4)}` : ""),
    ex.exists_unique ? "NPMLE exists and is unique" : `NPMLE does not exist: ${ex.scc_count} components, largest has ${ex.largest_scc.length} points`,
    describe("np", r.np), describe("sp", r.sp), describe("naive", r.naive),
  ];
});
