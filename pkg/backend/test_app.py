import pytest

import app as app_module
import harness


@pytest.fixture
def client():
    app_module.app.config['TESTING'] = True
    return app_module.app.test_client()


def test_health(client):
    response = client.get('/health')
    assert response.status_code == 200
    assert response.get_json()['status'] == 'healthy'


def test_home_lists_endpoints(client):
    assert 'mpp' in client.get('/').get_json()['endpoints']


def test_mpp(client):
    response = client.get('/api/mpp?temp=50&irradiance=1000')
    assert response.status_code == 200
    body = response.get_json()
    assert body['status'] == 'success'
    assert body['data']['p_max'] == pytest.approx(193.489, rel=0.02)


def test_curve(client):
    body = client.get('/api/curve?temp=25&irradiance=800&points=20').get_json()
    assert body['status'] == 'success'
    assert body['count'] == 20
    assert body['data'][0]['v'] == 0.0


def test_invalid_queries(client):
    response = client.get('/api/curve?irradiance=0')
    assert response.status_code == 400
    assert response.get_json()['status'] == 'error'

    response = client.get('/api/mpp?temp=hot')
    assert response.status_code == 400
    assert 'temp' in response.get_json()['message']


def test_run(client):
    response = client.post('/api/run', json={
        'env_initial': {'t_celsius': 50.0, 'g': 1000.0},
        'env_final': {'t_celsius': 0.0, 'g': 1000.0},
        'config': {'policy': 'adaptive', 'm': 0.09},
    })
    assert response.status_code == 200
    body = response.get_json()
    assert body['data']['converged']
    assert body['data']['iterations'] <= 30
    assert len(body['trace']) == body['data']['iterations']


def test_run_reports_missing_field(client):
    response = client.post('/api/run', json={
        'env_initial': {'t_celsius': 50.0, 'g': 1000.0},
        'env_final': {'t_celsius': 0.0, 'g': 1000.0},
    })
    assert response.status_code == 400
    assert response.get_json()['field'] == 'config'


def test_run_needs_json(client):
    response = client.post('/api/run', data='not json', content_type='text/plain')
    assert response.status_code == 400


def test_tables(client, monkeypatch):
    def first_rows(params):
        rows = harness.builtin_table_scenarios(params)
        return [rows[0], rows[4]]

    monkeypatch.setattr(app_module, 'builtin_table_scenarios', first_rows)
    body = client.get('/api/tables').get_json()
    assert body['status'] == 'success'
    assert set(body['data']) == {'table_1', 'table_2'}
    row = body['data']['table_1'][0]
    assert row['adaptive_iterations'] < row['fixed_iterations']
