class Product:
    def __init__(self, sku, name, price):
        self.sku = sku
        self.name = name
        self.price = price

    def label(self):
        return self.name + " (" + self.sku + ")"


class DigitalProduct(Product):
    def __init__(self, sku, name, price, url):
        super().__init__(sku, name, price)
        self.url = url

    def label(self):
        return self.name + " [download]"


class LineItem:
    def __init__(self, product, quantity=1):
        self.product = product
        self.quantity = quantity

    def subtotal(self):
        return self.product.price * self.quantity
