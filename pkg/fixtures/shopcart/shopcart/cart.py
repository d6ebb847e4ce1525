from .models import LineItem


class Cart:
    def __init__(self, owner):
        self.owner = owner
        self.items = []

    def add(self, product, quantity=1):
        for item in self.items:
            if item.product.sku == product.sku:
                item.quantity += quantity
                return item
        item = LineItem(product, quantity)
        self.items.append(item)
        return item

    def total(self):
        return sum(item.subtotal() for item in self.items)

    def is_empty(self):
        return len(self.items) == 0
