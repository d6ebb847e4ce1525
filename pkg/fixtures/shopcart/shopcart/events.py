LISTENERS = {}


def subscribe(name, callback):
    LISTENERS.setdefault(name, []).append(callback)


def emit(name, payload):
    count = 0
    for callback in LISTENERS.get(name, []):
        callback(payload)
        count += 1
    return count
