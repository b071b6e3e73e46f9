"""Cross-component contract: every payload the UI's flow logic can build is
accepted by the service's flow validation. Runs the built frontend module
under node; skips when the frontend has not been built."""

import json
import shutil
import subprocess
from pathlib import Path

import pytest

from explpipe.annotation.payloads import validate_payload

FLOW_JS = Path(__file__).parent.parent / "frontend" / "dist" / "flow.js"

NODE_SCRIPT = """
import {{ buildAbsolutePayload, absoluteComplete, pruneHidden }} from "{flow_js}";

const factualities = ["generally_false", "sometimes_true", "generally_true", "need_more_info"];
const amounts = [undefined, "not_enough", "enough", "too_much"];
const bools = [undefined, true, false];
const out = [];
for (const flowMode of ["mcqa", "nli"]) {{
  for (const factuality of factualities)
  for (const grammar of [true, false])
  for (const new_info of bools)
  for (const supports_label of bools)
  for (const amount_info of amounts)
  for (const acceptable of bools) {{
    const state = pruneHidden(
      {{ factuality, grammar, new_info, supports_label, amount_info, acceptable }},
      flowMode,
    );
    if (!absoluteComplete(state, flowMode)) continue;
    out.push({{ flow_mode: flowMode, payload: buildAbsolutePayload(state, flowMode) }});
  }}
}}
console.log(JSON.stringify(out));
"""


@pytest.mark.skipif(
    not FLOW_JS.exists() or shutil.which("node") is None,
    reason="frontend not built or node unavailable",
)
def test_every_ui_buildable_payload_passes_service_validation(tmp_path):
    script = tmp_path / "enumerate.mjs"
    script.write_text(NODE_SCRIPT.format(flow_js=FLOW_JS.resolve().as_posix()))
    result = subprocess.run(
        ["node", str(script)], capture_output=True, text=True, timeout=120
    )
    assert result.returncode == 0, result.stderr
    cases = json.loads(result.stdout)
    assert len(cases) > 100  # the enumeration covers the full flow lattice
    nli_no_newinfo = 0
    for case in cases:
        payload = {k: v for k, v in case["payload"].items() if v is not None}
        validate_payload("absolute", payload, case["flow_mode"])  # must not raise
        if case["flow_mode"] == "nli" and payload["new_info"] is False:
            assert "supports_label" in payload  # the NLI exception survives the wire
            nli_no_newinfo += 1
    assert nli_no_newinfo > 0
