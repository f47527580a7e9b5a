// placeholder translation unit; replaced as the module lands
