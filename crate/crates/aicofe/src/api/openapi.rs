//! OpenAPI 3 description generated from the route table.

use serde_json::{json, Map, Value};

use super::routes::{routes, Access};

/// `/instances/:id` becomes `/instances/{id}`.
pub fn openapi_path(axum_path: &str) -> String {
    axum_path
        .split('/')
        .map(|seg| match seg.strip_prefix(':') {
            Some(name) => format!("{{{name}}}"),
            None => seg.to_owned(),
        })
        .collect::<Vec<_>>()
        .join("/")
}

fn path_params(axum_path: &str) -> Vec<Value> {
    axum_path
        .split('/')
        .filter_map(|s| s.strip_prefix(':'))
        .map(|name| json!({ "name": name, "in": "path", "required": true, "schema": { "type": "string" } }))
        .collect()
}

pub fn document() -> Value {
    let mut paths = Map::new();
    for r in routes() {
        let mut op = json!({
            "summary": r.summary,
            "operationId": format!("{}{}", r.method.as_str().to_lowercase(), r.path.replace(['/', ':', '-', '.'], "_")),
            "responses": {
                r.status.to_string(): { "description": "success" },
                "default": { "description": "error", "content": { "application/json": { "schema": { "$ref": "#/components/schemas/Error" } } } }
            }
        });
        let params = path_params(r.path);
        if !params.is_empty() {
            op["parameters"] = Value::Array(params);
        }
        match r.access {
            Access::Public => {
                op["security"] = json!([]);
                op["x-roles"] = json!([]);
            }
            Access::Roles(roles) => {
                op["x-roles"] = Value::Array(roles.iter().map(|r| Value::String(r.as_str().into())).collect());
            }
        }
        let entry = paths
            .entry(openapi_path(r.path))
            .or_insert_with(|| Value::Object(Map::new()));
        entry[r.method.as_str().to_lowercase()] = op;
    }
    json!({
        "openapi": "3.0.3",
        "info": {
            "title": "AICoFe feedback service",
            "version": env!("CARGO_PKG_VERSION"),
        },
        "security": [{ "bearer": [] }],
        "components": {
            "securitySchemes": { "bearer": { "type": "http", "scheme": "bearer" } },
            "schemas": {
                "Error": {
                    "type": "object",
                    "required": ["error", "message"],
                    "properties": {
                        "error": { "type": "string" },
                        "message": { "type": "string" },
                        "item_id": { "type": "string" }
                    }
                }
            }
        },
        "paths": paths,
    })
}
