def greet(name):
    return "hello " + str(name)
