from .text import greet


def welcome_guest(number):
    return greet(number)


def run():
    return greet(7)
