// Built with: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { simulate_payment, histogram, decode } from "./pkg/relaysim_web.js";

const $ = (id) => document.getElementById(id);

function paymentOptions(form) {
  const f = form.elements;
  const options = {
    seed: Number(f.seed.value),
    model: f.model.value,
    pin_on_card: f.pin_on_card.checked,
    internal_disable: f.internal_disable.checked,
    deny_access: f.deny_access.checked,
  };
  if (f.timeout.checked) options.timeout_ms = Number(f.timeout_ms.value);
  if (f.relay_pin.value) options.relay_pin = f.relay_pin.value;
  return options;
}

function runPayment(event) {
  event?.preventDefault();
  const verdict = $("verdict");
  try {
    const r = JSON.parse(simulate_payment(JSON.stringify(paymentOptions($("payment")))));
    verdict.textContent = r.approved
      ? `Attack succeeded: ${r.outcome}. Wallet locked afterwards: ${r.wallet_locked_after}.`
      : `Attack blocked: ${r.outcome}${r.refused ? " (" + r.refused + ")" : ""}.`;
    verdict.className = r.approved ? "ok" : "blocked";
    $("trace").textContent = r.trace;
    $("direct").textContent = r.direct_trace;
  } catch (err) {
    verdict.className = "";
    verdict.textContent = `error: ${err}`;
  }
}

function draw(counts, width) {
  const canvas = $("chart");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const max = Math.max(1, ...counts);
  const w = canvas.width / counts.length;
  counts.forEach((c, i) => {
    const h = (c / max) * (canvas.height - 20);
    ctx.fillStyle = i === counts.length - 1 ? "#c60" : "#36c";
    ctx.fillRect(i * w, canvas.height - 20 - h, Math.max(1, w - 1), h);
  });
  ctx.fillStyle = "#000";
  ctx.fillText("0 ms", 0, canvas.height - 5);
  const last = `${width * (counts.length - 1)}+ ms`;
  ctx.fillText(last, canvas.width - ctx.measureText(last).width, canvas.height - 5);
}

function runBench(event) {
  event?.preventDefault();
  const f = $("bench").elements;
  try {
    const width = Number(f.width.value);
    const r = JSON.parse(histogram(f.path.value, Number(f.reps.value), BigInt(f.seed.value), width, Number(f.bins.value)));
    const s = r.summary;
    $("summary").textContent =
      `${s.count} samples, median ${s.median_ms.toFixed(1)} ms, mean ${s.mean_ms.toFixed(1)} ms, ` +
      `${(100 * s.share_above_1000_ms).toFixed(1)}% above 1 s`;
    draw(r.counts, width);
  } catch (err) {
    $("summary").textContent = `error: ${err}`;
  }
}

function runDecode(event) {
  event?.preventDefault();
  try {
    $("decoded").textContent = decode($("decode").elements.hex.value);
  } catch (err) {
    $("decoded").textContent = `error: ${err}`;
  }
}

await init();
$("payment").addEventListener("submit", runPayment);
$("bench").addEventListener("submit", runBench);
$("decode").addEventListener("submit", runDecode);
runPayment();
runBench();
runDecode();
