import json


def dump_orders(manager):
    rows = []
    for order in manager.orders:
        rows.append({"number": order.number, "amount": order.amount, "status": order.status})
    return json.dumps(rows)


def load_numbers(text):
    return [row["number"] for row in json.loads(text)]
