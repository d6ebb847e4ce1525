TAX_RATE = 0.2
RULES = []


def register_rule(rule):
    RULES.append(rule)
    return rule


def apply_rules(amount, rules, depth=0):
    if not rules:
        return amount
    return apply_rule(amount, rules[0], rules[1:], depth)


def apply_rule(amount, rule, rest, depth):
    return apply_rules(rule(amount), rest, depth + 1)


def with_tax(amount):
    return amount * (1 + TAX_RATE)


def final_price(cart):
    return with_tax(apply_rules(cart.total(), RULES))
