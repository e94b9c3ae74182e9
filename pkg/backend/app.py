from flask import Flask, jsonify, request
from flask_cors import CORS
import logging

import config
import store
from harness import (
    ScenarioError,
    builtin_table_scenarios,
    compare_report,
    report_frame,
    run_scenario,
    run_table,
)
from models import DomainError, Environment
from pv_model import NonConvergenceError, iv_curve, mpp_oracle

config.configure_logging()
logger = logging.getLogger(__name__)

app = Flask(__name__)

# Configure CORS for production
if config.CORS_ORIGINS == '*':
    CORS(app)
else:
    CORS(app, origins=config.CORS_ORIGINS.split(','))


def _error(message, status, **extra):
    return jsonify({'status': 'error', 'message': message, **extra}), status


@app.errorhandler(DomainError)
def handle_domain_error(e):
    field = getattr(e, 'field', None)
    if field:
        return _error(str(e), 400, field=field)
    return _error(str(e), 400)


@app.errorhandler(ScenarioError)
@app.errorhandler(NonConvergenceError)
def handle_model_failure(e):
    logger.error("Model failure: %s", e)
    return _error(str(e), 500)


def _query_float(name, default):
    raw = request.args.get(name)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise DomainError(f"query parameter '{name}' must be a number (got {raw!r})")


def _query_env():
    return Environment(t_celsius=_query_float('temp', 25.0), g=_query_float('irradiance', 1000.0))


@app.route('/health', methods=['GET'])
def health_check():
    """Health check endpoint"""
    return jsonify({'status': 'healthy', 'service': 'mppt-lab'})


@app.route('/', methods=['GET'])
def home():
    return jsonify({
        'service': 'PV MPPT simulation lab',
        'endpoints': {
            'health': '/health',
            'curve': '/api/curve?temp=25&irradiance=1000&points=100',
            'mpp': '/api/mpp?temp=25&irradiance=1000',
            'run': 'POST /api/run (scenario JSON)',
            'tables': '/api/tables',
        },
    })


@app.route('/api/curve', methods=['GET'])
def get_curve():
    points = int(_query_float('points', 100))
    curve = iv_curve(store.default_params(), _query_env(), points)
    return jsonify({
        'status': 'success',
        'data': [{'v': pt.v, 'i': pt.i, 'p': pt.p} for pt in curve],
        'count': len(curve),
    })


@app.route('/api/mpp', methods=['GET'])
def get_mpp():
    result = mpp_oracle(store.default_params(), _query_env(), config.ORACLE_V_TOL)
    return jsonify({'status': 'success', 'data': result.to_dict()})


@app.route('/api/run', methods=['POST'])
def post_run():
    doc = request.get_json(silent=True)
    if doc is None:
        return _error('request body must be a scenario JSON object', 400)
    result = run_scenario(store.scenario_from_dict(doc))
    trace = [
        {'iteration': r.iteration, 'v': r.v, 'i': r.i, 'p': r.p,
         'step': r.step, 'direction': r.direction.value}
        for r in result.trace
    ]
    return jsonify({'status': 'success', 'data': result.summary(), 'trace': trace})


@app.route('/api/tables', methods=['GET'])
def get_tables():
    rows = builtin_table_scenarios(store.default_params())
    pairs = run_table(rows)
    tables = {}
    for row, pair in zip(rows, pairs):
        tables.setdefault(row.table, []).append(pair)
    data = {
        name: report_frame(compare_report(selected)).to_dict(orient='records')
        for name, selected in tables.items()
    }
    return jsonify({'status': 'success', 'data': data})


if __name__ == '__main__':
    logger.info("Starting MPPT lab API on %s:%s", config.HOST, config.PORT)
    app.run(host=config.HOST, port=config.PORT, debug=config.FLASK_DEBUG)
