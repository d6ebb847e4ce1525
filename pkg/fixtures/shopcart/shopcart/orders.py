from .events import emit
from .inventory import Inventory, OutOfStock
from .pricing import final_price


class Order:
    def __init__(self, number, cart, amount):
        self.number = number
        self.cart = cart
        self.amount = amount
        self.status = "new"


class OrderManager:
    def __init__(self, inventory):
        self.inventory = inventory
        self.orders = []
        self.next_number = 1

    def checkout(self, cart):
        if cart.is_empty():
            return None
        try:
            for item in cart.items:
                self.inventory.reserve(item.product.sku, item.quantity)
        except OutOfStock as exc:
            emit("checkout-failed", exc.sku)
            return None
        order = Order(self.next_number, cart, final_price(cart))
        self.next_number += 1
        self.orders.append(order)
        emit("checkout", order.number)
        return order


def default_manager():
    inv = Inventory()
    inv.restock("apple", None)
    inv.restock("pear", 5)
    return OrderManager(inv)
