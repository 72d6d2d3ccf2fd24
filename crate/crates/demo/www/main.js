import init, { Demo } from "./pkg/costly_demo.js";

const $ = (id) => document.getElementById(id);
let demo = null;

function fail(e) {
  $("error").textContent = String(e && e.message ? e.message : e);
}

function guarded(fn) {
  return () => {
    $("error").textContent = "";
    // let the button repaint before the synchronous wasm call
    setTimeout(() => {
      try {
        fn();
      } catch (e) {
        fail(e);
      }
    }, 10);
  };
}

function reset() {
  demo = new Demo($("task").value, Number($("lambda").value), Number($("seed").value));
  $("row").max = demo.valRows() - 1;
  $("train-status").textContent = "untrained";
  $("train-summary").innerHTML = "";
  $("search-out").innerHTML = "";
  $("rules").textContent = "";
  drawCurve([]);
}

function drawCurve(curve) {
  const c = $("curve");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const pad = 30;
  const w = c.width - 2 * pad;
  const h = c.height - 2 * pad;
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w, h);
  g.fillStyle = "#555";
  g.fillText("1", 10, pad + 4);
  g.fillText("0", 10, pad + h / 2 + 4);
  g.fillText("-1", 6, pad + h + 4);
  if (curve.length === 0) return;
  const x = (i) => pad + (curve.length === 1 ? w / 2 : (i / (curve.length - 1)) * w);
  const y = (v) => pad + ((1 - v) / 2) * h;
  const series = [
    ["mean_reward", "#4a7bd0", "mean episode reward"],
    ["val_accuracy", "#2a9d5b", "validation accuracy"],
  ];
  series.forEach(([key, color, name], k) => {
    g.strokeStyle = color;
    g.beginPath();
    curve.forEach((p, i) => (i === 0 ? g.moveTo(x(i), y(p[key])) : g.lineTo(x(i), y(p[key]))));
    g.stroke();
    g.fillStyle = color;
    g.fillText(name, pad + 10 + k * 170, pad - 10);
  });
  g.fillStyle = "#555";
  g.fillText(`epoch ${curve[curve.length - 1].epoch}`, pad + w - 60, pad + h + 20);
}

function train() {
  const view = JSON.parse(demo.train(Number($("epochs").value)));
  drawCurve(view.curve);
  const v = view.validation;
  $("train-status").textContent = `${view.epochs_done} epochs`;
  const rows = view.feature_names
    .map((f, i) => {
      const rate = view.acquisition_rate[i];
      return `<tr><td>${f}</td><td>${view.costs[i].toFixed(2)}</td><td>${(100 * rate).toFixed(1)}%</td>` +
        `<td><span class="bar" style="width:${Math.round(200 * rate)}px"></span></td></tr>`;
    })
    .join("");
  $("train-summary").innerHTML =
    `<p>validation accuracy ${v.accuracy.toFixed(3)}, mean cost ${v.mean_cost.toFixed(3)}, ` +
    `objective ${v.objective.toFixed(3)}</p>` +
    `<table><tr><th>feature</th><th>cost</th><th>acquired</th><th></th></tr>${rows}</table>`;
}

function search() {
  const view = JSON.parse(demo.search(Number($("row").value), Number($("sims").value), Number($("cpuct").value)));
  const parts = view.steps.map((step, t) => {
    const total = step.visits.reduce((a, b) => a + b, 0);
    const rows = step.actions
      .map((name, a) => {
        const share = step.visits[a] / total;
        const cls = name === step.chosen ? ' class="chosen"' : "";
        return `<tr${cls}><td>${name}</td><td>${step.priors[a].toFixed(3)}</td>` +
          `<td><span class="bar prior" style="width:${Math.round(150 * step.priors[a])}px"></span></td>` +
          `<td>${step.visits[a]}</td><td><span class="bar" style="width:${Math.round(150 * share)}px"></span></td></tr>`;
      })
      .join("");
    const known = step.acquired.length ? step.acquired.join(", ") : "nothing acquired";
    return `<p>step ${t + 1}: ${known}</p>` +
      `<table><tr><th>action</th><th>prior</th><th></th><th>visits</th><th></th></tr>${rows}</table>`;
  });
  $("search-out").innerHTML =
    `<p>true class <b>${view.label}</b>; ${view.correct ? "classified correctly" : "misclassified"}, ` +
    `cost ${view.cost.toFixed(2)}</p>` + parts.join("");
}

function rules() {
  const view = JSON.parse(demo.rules(Number($("rule-sims").value), Number($("min-visits").value)));
  const lines = view.lines.map((l) => {
    const indent = "    ".repeat(l.depth);
    return l.condition ? `${indent}[${l.condition}] ${l.node}` : `${indent}${l.node}`;
  });
  $("rules").textContent = view.warning ? `${view.warning}\n` : lines.join("\n");
}

init()
  .then(() => {
    reset();
    $("reset").onclick = guarded(reset);
    $("train").onclick = guarded(train);
    $("search").onclick = guarded(search);
    $("rules-btn").onclick = guarded(rules);
  })
  .catch(fail);
