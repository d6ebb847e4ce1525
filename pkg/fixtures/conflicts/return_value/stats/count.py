def count(items):
    return len(items)


def describe(items):
    return "n=" + str(count(items))
