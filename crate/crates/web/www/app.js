import init, { synth_measure, briggs_curve, locate } from "./pkg/plumerise_web.js";

const W = 2592, H = 1944, STACK = [1296, 1500];
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(id, text, failed) {
  const el = $(id);
  el.textContent = text;
  el.classList.toggle("err", !!failed);
}

// wasm errors arrive as plain strings
function call(f, out) {
  try {
    return JSON.parse(f());
  } catch (e) {
    show(out, String(e), true);
    return null;
  }
}

function fmt(v, d = 1) {
  return v == null ? "n/a" : v.toFixed(d);
}

function runSynth() {
  const r = call(() => synth_measure(num("s-theta"), num("s-wind"), num("s-jitter"), num("s-seed")), "s-out");
  if (!r) return;
  const p = r.preview;
  const cv = $("s-canvas"), ctx = cv.getContext("2d");
  const k = cv.width / p.width;
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, cv.width, cv.height);
  ctx.fillStyle = "#8aa";
  for (let i = 0; i < p.cells.length; i++) {
    if (p.cells[i] === "1") ctx.fillRect((i % p.width) * k, Math.floor(i / p.width) * k, k, k);
  }
  ctx.strokeStyle = "#c40";
  ctx.lineWidth = 2;
  ctx.beginPath();
  p.curve.forEach(([x, y], i) => (i ? ctx.lineTo(x * k, y * k) : ctx.moveTo(x * k, y * k)));
  ctx.stroke();
  dot(ctx, p.stack[0] * k, p.stack[1] * k, "#000");
  dot(ctx, p.r[0] * k, p.r[1] * k, "#c00");

  const m = r.measured, t = r.truth;
  const err = t.delta_z_m ? (100 * (m.delta_z_m - t.delta_z_m)) / t.delta_z_m : null;
  show(
    "s-out",
    `φ ${fmt(r.phi_deg)}°, trajectory ends by ${r.end_reason}\n` +
      `measured Δz ${fmt(m.delta_z_m)} m at X_max ${fmt(m.x_max_m, 0)} m, x_R ${fmt(m.x_R_px)} px${m.truncated ? " (truncated)" : ""}\n` +
      `truth    Δz ${fmt(t.delta_z_m)} m at X_max ${fmt(t.x_max_m, 0)} m, x_R ${fmt(t.x_R_px)} px\n` +
      `error ${fmt(err, 2)} %   fit z = ${fmt(m.fit.a)} − ${fmt(m.fit.b)}·exp(−${m.fit.c.toExponential(3)}·x), rmse ${fmt(m.fit.rmse_px, 2)} px`,
  );
}

function dot(ctx, x, y, color) {
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(x, y, 4, 0, 2 * Math.PI);
  ctx.fill();
}

function runBriggs() {
  const id = $("b-stack").value || "12908";
  const r = call(() => briggs_curve(id, num("b-wind"), num("b-x"), 80, $("b-vsq").checked), "b-out");
  if (!r) return;
  if (!$("b-stack").options.length) {
    for (const s of r.roster) $("b-stack").add(new Option(s, s, s === id, s === id));
  }
  const cv = $("b-canvas"), ctx = cv.getContext("2d");
  const pad = 40, xMax = r.x_m[r.x_m.length - 1], zMax = Math.max(...r.delta_z_m) || 1;
  const sx = (x) => pad + (x / xMax) * (cv.width - 2 * pad);
  const sy = (z) => cv.height - pad - (z / zMax) * (cv.height - 2 * pad);
  ctx.clearRect(0, 0, cv.width, cv.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, cv.width - 2 * pad, cv.height - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.fillText("0", pad - 12, cv.height - pad + 4);
  ctx.fillText(`${zMax.toFixed(0)} m`, 2, pad + 4);
  ctx.fillText(`${xMax} m`, cv.width - pad - 20, cv.height - pad + 16);
  ctx.strokeStyle = "#06c";
  ctx.lineWidth = 2;
  ctx.beginPath();
  r.x_m.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(r.delta_z_m[i])) : ctx.moveTo(sx(x), sy(r.delta_z_m[i]))));
  ctx.stroke();
  const mid = Math.floor(r.x_m.length / 2);
  show(
    "b-out",
    `stack ${r.stack} (${r.height_m} m tall): Δz ${fmt(r.delta_z_m[mid])} m at ${fmt(r.x_m[mid], 0)} m, ` +
      `${fmt(r.delta_z_m[r.x_m.length - 1])} m at ${fmt(xMax, 0)} m`,
  );
}

let picked = [1796, 1000];

function drawFrame() {
  const cv = $("l-canvas"), ctx = cv.getContext("2d");
  const k = cv.width / W;
  ctx.fillStyle = "#eef";
  ctx.fillRect(0, 0, cv.width, cv.height);
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.moveTo(cv.width / 2, 0);
  ctx.lineTo(cv.width / 2, cv.height);
  ctx.moveTo(0, cv.height / 2);
  ctx.lineTo(cv.width, cv.height / 2);
  ctx.stroke();
  dot(ctx, (STACK[0] + 0.5) * k, (STACK[1] + 0.5) * k, "#000");
  dot(ctx, (picked[0] + 0.5) * k, (picked[1] + 0.5) * k, "#c00");
}

function runLocate() {
  drawFrame();
  const r = call(() => locate(picked[0], picked[1], num("l-phi")), "l-out");
  if (!r) return;
  show(
    "l-out",
    `pixel (${picked[0]}, ${picked[1]}) → image (${fmt(r.x_px)}, ${fmt(r.z_px)}) px, θ ${fmt(r.theta_deg, 2)}°, γ ${fmt(r.gamma_deg, 2)}°\n` +
      `X_R ${fmt(r.X_R_m)} m, Y_R ${fmt(r.Y_R_m)} m, G_R ${fmt(r.G_R, 4)} m/px\n` +
      `Z_R ${fmt(r.Z_R_m)} m, Δz ${fmt(r.delta_z_m)} m, X_max ${fmt(r.x_max_m)} m`,
  );
}

await init();
$("s-run").addEventListener("click", runSynth);
for (const id of ["b-stack", "b-wind", "b-x", "b-vsq"]) $(id).addEventListener("change", runBriggs);
$("l-phi").addEventListener("change", runLocate);
$("l-canvas").addEventListener("click", (e) => {
  const cv = e.currentTarget, rect = cv.getBoundingClientRect();
  picked = [
    Math.floor(((e.clientX - rect.left) / rect.width) * W),
    Math.floor(((e.clientY - rect.top) / rect.height) * H),
  ];
  runLocate();
});
runSynth();
runBriggs();
runLocate();
