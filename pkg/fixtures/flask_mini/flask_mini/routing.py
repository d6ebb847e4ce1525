class Rule:
    def __init__(self, path, endpoint):
        self.path = path
        self.endpoint = endpoint

    def matches(self, path):
        return self.path == path


class Map:
    def __init__(self):
        self.rules = []

    def add(self, rule):
        self.rules.append(rule)

    def match(self, path):
        for rule in self.rules:
            if rule.matches(path):
                return rule.endpoint
        return None

    def build(self, endpoint):
        for rule in self.rules:
            if rule.endpoint == endpoint:
                return rule.path
        return None
